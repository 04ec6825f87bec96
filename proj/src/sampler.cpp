#include "mdgru/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace mdgru {

CoarseExample sample_coarse_example(const Tensor& padded, const std::array<double, 3>& truth_padded,
                                    const PipelineConfig& pcfg, const SamplerConfig& scfg,
                                    Rng& rng) {
  pcfg.validate();
  if (padded.rank() != 4 || padded.extent(1) != pcfg.padded_extents[0] ||
      padded.extent(2) != pcfg.padded_extents[1] || padded.extent(3) != pcfg.padded_extents[2]) {
    throw_shape("sample_coarse_example: input " + padded.shape_str() +
                " does not match padded extents");
  }
  if (scfg.coarse_offset_range < 0) throw_config("sampler: offset range must be >= 0");

  const auto& pe = pcfg.padded_extents;
  std::array<int64_t, 3> off{0, 0, 0};
  bool ok = false;
  for (int attempt = 0; attempt < std::max(1, scfg.max_retries) && !ok; ++attempt) {
    ok = true;
    for (int a = 0; a < 3; ++a) {
      off[static_cast<size_t>(a)] =
          rng.uniform_int(-scfg.coarse_offset_range, scfg.coarse_offset_range);
      const double t = truth_padded[static_cast<size_t>(a)] - static_cast<double>(off[static_cast<size_t>(a)]);
      if (t < 0 || t > static_cast<double>(pe[static_cast<size_t>(a)] - 1)) ok = false;
    }
  }
  if (!ok) off = {0, 0, 0};  // centered fallback

  CoarseExample ex;
  ex.input = Tensor({2, pe[0], pe[1], pe[2]});
  const real* src = padded.data();
  real* dst = ex.input.data();
  const int64_t vol = pe[0] * pe[1] * pe[2];
  // crop(x) = padded(x + off), zero outside.
  const int64_t x_lo = std::max<int64_t>(0, -off[0]), x_hi = std::min(pe[0], pe[0] - off[0]);
  const int64_t y_lo = std::max<int64_t>(0, -off[1]), y_hi = std::min(pe[1], pe[1] - off[1]);
  const int64_t z_lo = std::max<int64_t>(0, -off[2]), z_hi = std::min(pe[2], pe[2] - off[2]);
  for (int64_t c = 0; c < 2; ++c) {
    for (int64_t x = x_lo; x < x_hi; ++x) {
      for (int64_t y = y_lo; y < y_hi; ++y) {
        const real* s = src + c * vol + ((x + off[0]) * pe[1] + (y + off[1])) * pe[2] + z_lo + off[2];
        real* d = dst + c * vol + (x * pe[1] + y) * pe[2] + z_lo;
        std::copy(s, s + (z_hi - z_lo), d);
      }
    }
  }
  const auto grid = pcfg.coarse_grid_extents();
  for (int a = 0; a < 3; ++a) {
    ex.truth_crop[static_cast<size_t>(a)] =
        truth_padded[static_cast<size_t>(a)] - static_cast<double>(off[static_cast<size_t>(a)]);
    ex.target[static_cast<size_t>(a)] = coarse_class_of(ex.truth_crop[static_cast<size_t>(a)],
                                                        pcfg.coarse_factor, grid[static_cast<size_t>(a)]);
  }
  return ex;
}

FineExample sample_fine_example(const Tensor& pre, const std::array<double, 3>& truth,
                                const std::array<int64_t, 3>& window_extents, int64_t n,
                                Rng& rng) {
  if (pre.rank() != 4) {
    throw_shape("sample_fine_example: expected (channels, X, Y, Z), got " + pre.shape_str());
  }
  if (n < 1) throw_config("sample_fine_example: superresolution factor must be >= 1");
  std::array<int64_t, 3> origin{};
  for (int a = 0; a < 3; ++a) {
    const int64_t ext = pre.extent(a + 1);
    const int64_t w = window_extents[static_cast<size_t>(a)];
    if (w > ext) {
      throw_dim("sample_fine_example: window extent " + std::to_string(w) +
                " exceeds volume extent " + std::to_string(ext));
    }
    const double t = truth[static_cast<size_t>(a)];
    if (t < 0 || t > static_cast<double>(ext - 1)) {
      throw_contract("sample_fine_example: truth coordinate " + std::to_string(t) +
                     " outside the volume on axis " + std::to_string(a));
    }
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(t)) - w + 1);
    const int64_t hi = std::min<int64_t>(ext - w, static_cast<int64_t>(std::floor(t)));
    origin[static_cast<size_t>(a)] = rng.uniform_int(lo, hi);
  }

  FineExample ex;
  const int64_t c = pre.extent(0);
  ex.input = Tensor({c, window_extents[0], window_extents[1], window_extents[2]});
  const int64_t in_y = pre.extent(2), in_z = pre.extent(3);
  const int64_t in_vol = pre.extent(1) * in_y * in_z;
  const real* src = pre.data();
  real* dst = ex.input.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t x = 0; x < window_extents[0]; ++x) {
      for (int64_t y = 0; y < window_extents[1]; ++y) {
        const real* s =
            src + ch * in_vol + ((origin[0] + x) * in_y + (origin[1] + y)) * in_z + origin[2];
        real* d = dst + ((ch * window_extents[0] + x) * window_extents[1] + y) * window_extents[2];
        std::copy(s, s + window_extents[2], d);
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    ex.truth_window[static_cast<size_t>(a)] =
        truth[static_cast<size_t>(a)] - static_cast<double>(origin[static_cast<size_t>(a)]);
    ex.target[static_cast<size_t>(a)] = fine_class_of(
        ex.truth_window[static_cast<size_t>(a)], n, window_extents[static_cast<size_t>(a)] * n);
  }
  return ex;
}

}  // namespace mdgru
