#include <cmath>

#include "doctest.h"
#include "mdgru/rng.hpp"

using namespace mdgru;

TEST_CASE("identical seeds give identical sequences") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same < 4);
}

TEST_CASE("child streams are independent of each other and the parent") {
  Rng parent(9);
  Rng c1 = parent.stream("alpha");
  Rng c2 = parent.stream("beta");
  Rng c3 = parent.stream("alpha", 0);
  Rng c4 = parent.stream("alpha", 1);
  CHECK(c1.next_u64() != c2.next_u64());
  CHECK(c3.next_u64() != c4.next_u64());

  // stream() does not consume the parent sequence.
  Rng p1(9), p2(9);
  (void)p1.stream("anything");
  CHECK(p1.next_u64() == p2.next_u64());

  // Named streams are reproducible.
  Rng q(9);
  Rng c1again = q.stream("alpha");
  Rng fresh = Rng(9).stream("alpha");
  CHECK(c1again.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform ranges") {
  Rng r(42);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = r.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("uniform_int covers the inclusive range") {
  Rng r(7);
  bool hit_lo = false, hit_hi = false;
  for (int i = 0; i < 2000; ++i) {
    int64_t v = r.uniform_int(-3, 3);
    CHECK(v >= -3);
    CHECK(v <= 3);
    hit_lo = hit_lo || v == -3;
    hit_hi = hit_hi || v == 3;
  }
  CHECK(hit_lo);
  CHECK(hit_hi);
  for (int i = 0; i < 10; ++i) CHECK(r.uniform_int(5, 5) == 5);
}

TEST_CASE("bernoulli extremes") {
  Rng r(11);
  for (int i = 0; i < 200; ++i) {
    CHECK_FALSE(r.bernoulli(0.0));
    CHECK(r.bernoulli(1.0));
  }
}

TEST_CASE("normal moments") {
  Rng r(5);
  const int n = 40000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}
