#include <cmath>

#include "doctest.h"
#include "mdgru/gradcheck.hpp"
#include "mdgru/ops.hpp"
#include "mdgru/rng.hpp"

using namespace mdgru;

namespace {

void fill_uniform(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<real>(rng.uniform(lo, hi));
}

}  // namespace

TEST_CASE("sum of a parameter gives unit gradients") {
  Parameter w{"w", Tensor({2, 3}, {1, -2, 3, 0, 5, -1})};
  Tape tp(true);
  Var loss = ops::sum_all(tp, tp.parameter(w));
  tp.backward(loss);
  for (int64_t i = 0; i < w.grad.size(); ++i) CHECK(w.grad[i] == 1);
}

TEST_CASE("gradient of sum of squares is twice the value") {
  Parameter w{"w", Tensor({2}, {1, 2})};
  Tape tp(true);
  Var v = tp.parameter(w);
  Var loss = ops::sum_all(tp, ops::mul(tp, v, v));
  tp.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(2).epsilon(1e-12));
  CHECK(w.grad[1] == doctest::Approx(4).epsilon(1e-12));
}

TEST_CASE("gradients accumulate when a parameter is placed twice") {
  Parameter w{"w", Tensor({2}, {3, -1})};
  Tape tp(true);
  Var a = tp.parameter(w);
  Var b = tp.parameter(w);
  Var loss = ops::sum_all(tp, ops::add(tp, a, b));
  tp.backward(loss);
  CHECK(w.grad[0] == 2);
  CHECK(w.grad[1] == 2);
}

TEST_CASE("input vars can expose gradients, constants never do") {
  Tape tp(true);
  Var x = tp.input(Tensor({2}, {1, 2}), /*needs_grad=*/true);
  Var c = tp.constant(Tensor({2}, {5, 5}));
  Var loss = ops::sum_all(tp, ops::mul(tp, x, c));
  tp.backward(loss);
  CHECK(tp.has_grad(x));
  CHECK(tp.grad(x)[0] == 5);
  CHECK_FALSE(tp.has_grad(c));
}

TEST_CASE("backward state errors") {
  {
    Tape tp(false);
    Var v = tp.constant(Tensor::scalar(1));
    CHECK_THROWS_AS(tp.backward(v), Error);
  }
  {
    Tape tp(true);
    Parameter w{"w", Tensor::scalar(2)};
    Var loss = ops::sum_all(tp, tp.parameter(w));
    tp.backward(loss);
    CHECK_THROWS_AS(tp.backward(loss), Error);  // one-shot
  }
  {
    Tape tp(true);
    Parameter w{"w", Tensor({2}, {1, 2})};
    Var v = tp.parameter(w);
    CHECK_THROWS_AS(tp.backward(v), Error);  // non-scalar loss
  }
}

TEST_CASE("non-recording tapes compute values but record nothing") {
  Tape tp(false);
  Var a = tp.constant(Tensor({2}, {1, 2}));
  Var s = ops::sigmoid(tp, a);
  CHECK(tp.val(s)[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(tp.op_count() == 0);
}

TEST_CASE("elementwise forward values") {
  Tape tp(false);
  Var a = tp.constant(Tensor({3}, {-1, 0, 2}));
  Var b = tp.constant(Tensor({3}, {4, -2, 1}));
  CHECK(tp.val(ops::add(tp, a, b))[0] == 3);
  CHECK(tp.val(ops::sub(tp, a, b))[2] == 1);
  CHECK(tp.val(ops::mul(tp, a, b))[0] == -4);
  CHECK(tp.val(ops::affine(tp, a, real(2), real(10)))[2] == 14);
  CHECK(tp.val(ops::tanh(tp, a))[1] == 0);
  CHECK(tp.val(ops::lrelu(tp, a, real(0.1)))[0] == real(-0.1));
  CHECK(tp.val(ops::lrelu(tp, a, real(0.1)))[2] == 2);
  // sigmoid is stable far into both tails
  Var big = tp.constant(Tensor({2}, {800, -800}));
  const Tensor& s = tp.val(ops::sigmoid(tp, big));
  CHECK(s[0] == 1);
  CHECK(s[1] == 0);
  CHECK(std::isfinite(static_cast<double>(s[1])));
}

TEST_CASE("shape mismatches are rejected eagerly") {
  Tape tp(false);
  Var a = tp.constant(Tensor({2}));
  Var b = tp.constant(Tensor({3}));
  CHECK_THROWS_AS(ops::add(tp, a, b), Error);
  CHECK_THROWS_AS(ops::mul(tp, a, b), Error);
  CHECK_THROWS_AS(ops::stack0(tp, {a, b}), Error);
  CHECK_THROWS_AS(ops::reshape(tp, a, {4}), Error);
  CHECK_THROWS_AS(ops::avg_pool0(tp, b, 2), Error);  // 3 not divisible by 2
}

TEST_CASE("structural ops move data where expected") {
  Tape tp(false);
  // (C=2, S=3) -> flat (6) with channel fastest
  Var x = tp.constant(Tensor({2, 3}, {0, 1, 2, 10, 11, 12}));
  const Tensor& f = tp.val(ops::flatten_channels_last(tp, x));
  REQUIRE(f.size() == 6);
  const real expect[6] = {0, 10, 1, 11, 2, 12};
  for (int64_t i = 0; i < 6; ++i) CHECK(f[i] == expect[i]);

  // slice_axis drops the axis
  Var y = tp.constant(Tensor({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7}));
  const Tensor& s = tp.val(ops::slice_axis(tp, y, 1, 1));
  REQUIRE(s.shape() == std::vector<int64_t>{2, 2});
  CHECK(s[0] == 2);
  CHECK(s[1] == 3);
  CHECK(s[2] == 6);
  CHECK(s[3] == 7);

  // move_axis0 to position 2
  Var m = tp.constant(Tensor({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7}));
  const Tensor& mv = tp.val(ops::move_axis0(tp, m, 2));
  REQUIRE(mv.shape() == std::vector<int64_t>{2, 2, 2});
  // out[j,k,i] = in[i,j,k]
  CHECK(mv.at({0, 0, 0}) == 0);
  CHECK(mv.at({0, 0, 1}) == 4);
  CHECK(mv.at({1, 0, 1}) == 6);
  CHECK(mv.at({1, 1, 0}) == 3);

  // stack0 then slice_range0
  Var s1 = tp.constant(Tensor({2}, {1, 2}));
  Var s2 = tp.constant(Tensor({2}, {3, 4}));
  const Tensor& st = tp.val(ops::stack0(tp, {s1, s2}));
  REQUIRE(st.shape() == std::vector<int64_t>{2, 2});
  CHECK(st[2] == 3);
  Var flat = tp.constant(Tensor({4}, {9, 8, 7, 6}));
  const Tensor& rg = tp.val(ops::slice_range0(tp, flat, 1, 2));
  REQUIRE(rg.size() == 2);
  CHECK(rg[0] == 8);
  CHECK(rg[1] == 7);
}

TEST_CASE("softmax and cross entropy forward") {
  Tape tp(false);
  Var x = tp.constant(Tensor({3}, {1, 1, 1}));
  const Tensor& p = tp.val(ops::softmax(tp, x));
  for (int64_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  Var probs = tp.constant(Tensor({3}, {real(0.2), real(0.5), real(0.3)}));
  const double want = -std::log(0.5 + 1e-12);
  CHECK(tp.val(ops::cross_entropy(tp, probs, 1))[0] == doctest::Approx(want).epsilon(1e-15));
  CHECK_THROWS_AS(ops::cross_entropy(tp, probs, 3), Error);

  // softmax is shift invariant and survives large logits
  Var big = tp.constant(Tensor({2}, {1000, 999}));
  const Tensor& pb = tp.val(ops::softmax(tp, big));
  CHECK(pb[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("finite differences validate every op's backward pass") {
  Rng rng(808);

  // avg_pool0 + stack0 + move_axis0 + slice_axis together
  {
    Parameter a{"a", Tensor({2, 3})}, b{"b", Tensor({2, 3})};
    fill_uniform(a.value, rng);
    fill_uniform(b.value, rng);
    auto build = [&](Tape& tp) {
      Var st = ops::stack0(tp, {tp.parameter(a), tp.parameter(b)});  // (2,2,3)
      Var mv = ops::move_axis0(tp, st, 2);                           // (2,3,2)
      Var pool = ops::avg_pool0(tp, mv, 2);                          // (1,3,2)
      Var sl = ops::slice_axis(tp, pool, 2, 1);                      // (1,3)
      return ops::sum_all(tp, ops::tanh(tp, sl));
    };
    CHECK(max_relative_grad_error(build, {&a, &b}, 1e-5, 0) < 1e-4);
  }

  // flatten + reshape + slice_range0 + fc + softmax + cross_entropy
  {
    Parameter x{"x", Tensor({2, 2, 2})}, w{"w", Tensor({5, 8})}, b{"b", Tensor({5})};
    fill_uniform(x.value, rng);
    fill_uniform(w.value, rng);
    fill_uniform(b.value, rng);
    auto build = [&](Tape& tp) {
      Var f = ops::flatten_channels_last(tp, tp.parameter(x));
      Var r = ops::reshape(tp, f, {8});
      Var h = ops::fc(tp, r, tp.parameter(w), tp.parameter(b));
      Var sl = ops::slice_range0(tp, h, 1, 3);
      return ops::cross_entropy(tp, ops::softmax(tp, sl), 2);
    };
    CHECK(max_relative_grad_error(build, {&x, &w, &b}, 1e-5, 0) < 1e-4);
  }

  // lrelu around both sides of the kink (values away from 0)
  {
    Parameter x{"x", Tensor({4}, {real(-0.7), real(0.9), real(-0.2), real(0.4)})};
    auto build = [&](Tape& tp) {
      return ops::sum_all(tp, ops::lrelu(tp, tp.parameter(x), real(0.01)));
    };
    CHECK(max_relative_grad_error(build, {&x}, 1e-5, 0) < 1e-4);
  }
}

TEST_CASE("the fault injector makes gradient checks fail") {
  Parameter w{"w", Tensor({2}, {real(0.5), real(-0.3)})};
  auto build = [&](Tape& tp) {
    Var v = tp.parameter(w);
    return ops::sum_all(tp, ops::mul(tp, v, v));
  };
  CHECK(max_relative_grad_error(build, {&w}, 1e-5, 0, /*inject_fault=*/false) < 1e-4);
  CHECK(max_relative_grad_error(build, {&w}, 1e-5, 0, /*inject_fault=*/true) > 1e-4);
}
