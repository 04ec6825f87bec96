// Timing comparison between the parallel kernels and the serial reference
// implementations, with a max-absolute-difference column as a sanity check.
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "mdgru/kernels.hpp"
#include "mdgru/reference.hpp"
#include "mdgru/rng.hpp"

namespace {

using namespace mdgru;

Tensor random_tensor(const std::vector<int64_t>& shape, Rng& rng) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<real>(rng.uniform(-1, 1));
  return t;
}

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void row(const char* name, double par_ms, double ref_ms, double diff) {
  std::printf("%-34s %10.3f %10.3f %8.2fx %10.2e\n", name, par_ms, ref_ms,
              ref_ms / std::max(par_ms, 1e-9), diff);
}

void bench_conv(const char* name, const std::vector<int64_t>& x_shape,
                const std::vector<int64_t>& w_shape, const std::vector<int64_t>& strides,
                int repeats, Rng& rng) {
  Tensor x = random_tensor(x_shape, rng);
  Tensor w = random_tensor(w_shape, rng);
  Tensor b = random_tensor({w_shape[0]}, rng);
  const auto geom = kernels::make_conv_geom(x.shape(), w.shape(), strides);
  Tensor y(geom.out_shape());

  const double par =
      time_ms([&] { kernels::conv_forward(geom, x.data(), w.data(), b.data(), y.data()); },
              repeats);
  Tensor yref;
  const double ref = time_ms([&] { yref = ref::conv_forward(x, w, &b, strides); }, repeats);
  row(name, par, ref, max_abs_diff(y, yref));
}

}  // namespace

int main() {
  std::printf("threads=%d\n\n", omp_get_max_threads());
  std::printf("%-34s %10s %10s %9s %10s\n", "kernel", "par_ms", "ref_ms", "speedup", "max|diff|");

  Rng rng(42);

  bench_conv("conv 2->8 32^3 k3 s1", {2, 32, 32, 32}, {8, 2, 3, 3, 3}, {1, 1, 1}, 3, rng);
  bench_conv("conv 2->8 64^3 k5 s2", {2, 64, 64, 64}, {8, 2, 5, 5, 5}, {2, 2, 2}, 3, rng);
  bench_conv("conv 16->16 16^3 k3 s1", {16, 16, 16, 16}, {16, 16, 3, 3, 3}, {1, 1, 1}, 3, rng);
  bench_conv("conv 8->16 32x32 k3 s2 (slice)", {8, 32, 32}, {16, 8, 3, 3}, {2, 2}, 10, rng);

  {
    Tensor x = random_tensor({64, 16, 32, 32}, rng);
    Tensor y({32, 16, 32, 32});
    const int64_t rest = 16 * 32 * 32;
    const double par =
        time_ms([&] { kernels::avg_pool0(64, rest, 2, x.data(), y.data()); }, 20);
    Tensor yref;
    const double ref = time_ms([&] { yref = ref::avg_pool0(x, 2); }, 20);
    row("avg_pool0 64x(16,32,32) s2", par, ref, max_abs_diff(y, yref));
  }

  {
    Tensor w = random_tensor({768, 3072}, rng);
    Tensor x = random_tensor({3072}, rng);
    Tensor b = random_tensor({768}, rng);
    Tensor y({768});
    const double par = time_ms(
        [&] { kernels::matvec(768, 3072, w.data(), x.data(), b.data(), y.data()); }, 50);
    Tensor yref;
    const double ref = time_ms([&] { yref = ref::matvec(w, x, &b); }, 50);
    row("matvec 768x3072", par, ref, max_abs_diff(y, yref));
  }

  return 0;
}
