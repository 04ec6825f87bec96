// Training-example samplers for both stages.
#pragma once

#include "mdgru/pipeline.hpp"
#include "mdgru/rng.hpp"

namespace mdgru {

struct SamplerConfig {
  // Coarse crop shift per axis, uniform in [-range, +range] voxels.
  int64_t coarse_offset_range = 100;
  // Offsets that push the truth outside the crop are resampled this many
  // times before falling back to the centered crop.
  int max_retries = 20;
};

struct CoarseExample {
  Tensor input;  // (2, padded extents), shifted crop, zero-filled outside
  std::array<int64_t, 3> target;
  std::array<double, 3> truth_crop;  // truth in the crop's frame
};

// Shifts the padded-size crop by a random offset; voxels sampled from outside
// the padded frame are zero. The truth must land inside the crop (retries,
// then centered fallback). Target = nearest coarse cell of the shifted truth.
CoarseExample sample_coarse_example(const Tensor& padded, const std::array<double, 3>& truth_padded,
                                    const PipelineConfig& pcfg, const SamplerConfig& scfg,
                                    Rng& rng);

struct FineExample {
  Tensor input;  // (2, window extents), exact copy from the volume
  std::array<int64_t, 3> target;
  std::array<double, 3> truth_window;
};

// Window origin uniform over all integer origins that keep the truth inside
// the window and the window inside the volume. Target class =
// round(window-relative truth * n), clamped.
FineExample sample_fine_example(const Tensor& pre, const std::array<double, 3>& truth,
                                const std::array<int64_t, 3>& window_extents, int64_t n,
                                Rng& rng);

}  // namespace mdgru
