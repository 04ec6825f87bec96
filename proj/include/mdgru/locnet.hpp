// Localization network: three compositions of (MD-GRU layer, pointwise 1^k
// convolution, tanh), flattening, two fully connected layers, and one softmax
// head per axis predicting a discrete coordinate class.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdgru/cgru.hpp"

namespace mdgru {

struct LocNetConfig {
  std::array<int64_t, 3> input_extents{64, 64, 64};
  int64_t input_channels = 2;
  std::array<int64_t, 3> mdgru_channels{32, 64, 128};
  std::array<int64_t, 3> pointwise_channels{48, 96, 192};
  int64_t stride = 2;       // per composition, every axis
  int64_t cgru_kernel = 3;  // in-slice kernel extent of every C-GRU
  std::array<int64_t, 3> classes_per_axis{256, 256, 256};
  int64_t superres_factor = 1;  // classes are 1/n voxels apart
  real dropconnect_rate = 0.5;

  // Extent checks and divisibility by stride^3.
  void validate() const;
  std::array<int64_t, 3> preflatten_extents() const;
  int64_t flat_size() const;
  int64_t class_total() const;
  // {hidden, output} = {4 * class_total, class_total}.
  std::array<int64_t, 2> fc_widths() const;
};

// Per-axis probability vectors, detached from any tape.
struct CoordinateDistribution {
  std::array<Tensor, 3> axis;

  void validate() const;  // each vector sums to 1 +- 1e-9, nonnegative
};

// Forward-pass handles to the three softmax outputs while still on the tape.
struct DistVars {
  std::array<Var, 3> axis;
};

// Masks for the three compositions' C-GRU input kernels (training only).
struct LocNetMasks {
  std::array<DropMasks, 3> comp;
};

struct LocNet {
  LocNetConfig cfg;
  std::vector<MdGruLayer> mdgru;          // 3 layers
  std::vector<Parameter> pw_w, pw_b;      // pointwise convolutions, 3 each
  Parameter fc1_w, fc1_b, fc2_w, fc2_b;

  static LocNet make(const LocNetConfig& cfg, const std::string& prefix);
  std::vector<Parameter*> all_params();
};

DistVars locnet_forward(Tape& tp, Var volume, LocNet& net, bool training,
                        const LocNetMasks* masks = nullptr);

// Copies the softmax outputs off the tape.
CoordinateDistribution to_distribution(const Tape& tp, const DistVars& d);

// Sum of the three per-axis cross entropies.
Var locnet_loss(Tape& tp, const DistVars& d, const std::array<int64_t, 3>& target);

// Per-axis argmax; ties break toward the lower index.
std::array<int64_t, 3> argmax_coordinate(const CoordinateDistribution& d);

}  // namespace mdgru
