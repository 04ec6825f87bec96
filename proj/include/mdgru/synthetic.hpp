// Synthetic volume generator: smooth low-frequency background plus an
// oriented Gaussian pit whose apex is the ground-truth landmark, plus noise.
#pragma once

#include <array>
#include <string>

#include "mdgru/dataset.hpp"
#include "mdgru/rng.hpp"
#include "mdgru/volume.hpp"

namespace mdgru {

struct SynthSpec {
  std::array<int64_t, 3> extents{64, 64, 64};
  std::array<double, 3> spacing{1, 1, 1};
  // Apex kept at least this far from every face (in voxels).
  int64_t margin = 16;
  double background_amp = 2.0;
  double background_cycles = 2.0;  // max cosine cycles across the volume
  int background_terms = 3;
  double notch_depth = 30.0;
  double notch_width_narrow = 2.5;  // Gaussian sigma, two principal axes
  double notch_width_wide = 5.0;    // third principal axis
  double noise_level = 0.5;
  uint64_t seed = 1;

  void validate() const;
};

struct SynthCase {
  Volume volume;
  Landmark truth;  // integer apex coordinates, original space
};

// Deterministic in (spec.seed, index); independent of generation order.
SynthCase synth_case(const SynthSpec& spec, int64_t index);

struct SplitCounts {
  int64_t train = 0;
  int64_t validation = 0;
  int64_t test = 0;

  int64_t total() const { return train + validation + test; }
};

// Writes volumes/ and landmarks/ under out_dir plus manifest.tsv (paths
// relative to out_dir). One volume per subject; subjects s0000, s0001, ...
// are assigned train, then validation, then test.
DatasetManifest generate_synthetic(const SynthSpec& spec, const SplitCounts& counts,
                                   const std::string& out_dir);

}  // namespace mdgru
