// Two-stage localization pipeline: preprocessing, padding, the coarse
// whole-volume stage, window extraction, the fine stage, and the coordinate
// mappings between the frames involved.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mdgru/locnet.hpp"
#include "mdgru/volume.hpp"

namespace mdgru {

struct PipelineConfig {
  std::array<int64_t, 3> window_extents{64, 64, 64};
  int64_t coarse_factor = 4;
  std::array<int64_t, 3> padded_extents{256, 256, 256};
  int64_t input_conv_channels = 16;
  int64_t superres_n = 4;
  bool parabola = true;
  double sigma_hp = 5.0;  // high-pass Gaussian sigma, voxels

  int64_t input_conv_stride() const { return coarse_factor; }
  int64_t input_conv_kernel() const { return 2 * coarse_factor + 1; }
  // padded extents / coarse factor (= window extents by the invariant).
  std::array<int64_t, 3> coarse_grid_extents() const;
  void validate() const;
};

// Channel widths and regularization shared by both stages' networks.
struct NetProfile {
  std::array<int64_t, 3> mdgru_channels{32, 64, 128};
  std::array<int64_t, 3> pointwise_channels{48, 96, 192};
  int64_t cgru_kernel = 3;
  real dropconnect_rate = 0.5;
};

// Coarse stage: trainable strided input convolution + localization net over
// the subsampled grid (one class per grid cell, n = 1).
struct CoarseModel {
  ConvSpec input_spec;
  Parameter in_w, in_b;
  LocNet net;

  static CoarseModel make(const PipelineConfig& pcfg, const NetProfile& profile);
  std::vector<Parameter*> all_params();
};

// Fine stage: localization net over the full-resolution window with
// superresolution factor n (classes 1/n voxel apart).
struct FineModel {
  int64_t n = 4;
  LocNet net;

  static FineModel make(const PipelineConfig& pcfg, const NetProfile& profile, int64_t n);
  std::vector<Parameter*> all_params();
};

// Volume -> (2, X, Y, Z) tensor: channel 0 the normalized original, channel 1
// the normalized high-pass (original minus Gaussian blur). Each channel is
// normalized to zero mean / unit standard deviation over the whole volume,
// with the deviation floored at 1e-8 (a constant volume maps to zeros).
Tensor preprocess(const Volume& v, double sigma_hp);

struct PadResult {
  Tensor padded;                         // (C, padded extents)
  std::array<int64_t, 3> origin_offset;  // original origin inside the padded frame
  std::vector<std::string> warnings;     // non-empty when center-cropping
};

// Zero-pads symmetrically (extra voxel to the high side); center-crops with a
// warning when an extent exceeds the target (origin offset then negative).
PadResult pad_center(const Tensor& channels_first, std::array<int64_t, 3> padded_extents);

struct PadVolumeResult {
  Volume padded;
  std::array<int64_t, 3> origin_offset;
  std::vector<std::string> warnings;
};
PadVolumeResult pad_center(const Volume& v, std::array<int64_t, 3> padded_extents);

struct StageOutput {
  CoordinateDistribution dist;
  Landmark lm;
};

// Inference (keep-probability-scaled weights, no masks). Decodes by argmax;
// the coarse stage never applies parabola refinement.
StageOutput coarse_stage(const Tensor& padded, CoarseModel& m);

// original = coarse * factor + (factor - 1) / 2 - origin_offset (cell-center
// convention), per axis.
Landmark coarse_to_original(const Landmark& c, std::array<int64_t, 3> origin_offset,
                            int64_t factor);

struct WindowResult {
  Tensor window;  // (C, window extents), exact voxel copies
  std::array<int64_t, 3> origin;
};

// Integer window origin = round(center) - extents/2, clamped inside the
// volume. No interpolation.
WindowResult extract_window(const Tensor& channels_first, const Landmark& center,
                            std::array<int64_t, 3> window_extents);

// Continuous peak position from the quadratic through (peak-1, peak, peak+1).
// Returns the peak unchanged at the boundaries or under degenerate curvature;
// the offset is clamped to [-0.5, 0.5].
double parabola_refine(const Tensor& probs, int64_t peak);

StageOutput fine_stage(const Tensor& window, FineModel& m, bool use_parabola);

struct LocalizeResult {
  Landmark voxel;  // original space, continuous
  std::array<double, 3> mm;
  Landmark coarse_voxel;  // coarse estimate mapped to original space
  std::array<int64_t, 3> window_origin;
  CoordinateDistribution coarse_dist;
  CoordinateDistribution fine_dist;
  std::vector<std::string> warnings;
};

// Full pipeline. Any stage failure is rethrown with a stage-tagged message.
LocalizeResult localize(const Volume& v, CoarseModel& coarse, FineModel& fine,
                        const PipelineConfig& pcfg, bool use_parabola);

// Shared rounding convention: ties at .5 round toward +infinity.
inline int64_t round_half_up(double v) { return static_cast<int64_t>(std::floor(v + 0.5)); }

// Nearest coarse cell whose center is c*factor + (factor-1)/2.
int64_t coarse_class_of(double padded_coord, int64_t factor, int64_t num_classes);
// Class grid at resolution 1/n over window-relative coordinates.
int64_t fine_class_of(double window_coord, int64_t n, int64_t num_classes);

}  // namespace mdgru
