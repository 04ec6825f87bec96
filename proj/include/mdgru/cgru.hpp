// Convolutional GRU run along one spatial axis ("time"), and the layer that
// sweeps every axis in both orientations and sums the pooled results.
//
// Gate algebra per step, all terms at the reduced (strided) resolution:
//   f(x_t; a, b) = strided conv of the full-resolution slice x_t, plus bias
//   g(h; a)      = unstrided conv of the previous state
//   r = sigmoid(f(x_t; w_r, b_r) + g(h; u_r))
//   z = sigmoid(f(x_t; w_z, b_z) + g(h; u_z))
//   cand = tanh(f(x_t; w, b) + r * g(h; u))   (reset scales the state term)
//   h_t = z * h_prev + (1 - z) * cand
// After the sweep the state sequence is mean-pooled along time by the same
// stride, so every extent shrinks by S.
#pragma once

#include <string>
#include <vector>

#include "mdgru/ops.hpp"
#include "mdgru/tape.hpp"

namespace mdgru {

// One direction's trainable tensors. w_* run over the in-slice axes with the
// layer stride; u_* are stride-1 over the state; b_* are per-channel.
struct CGruParams {
  ConvSpec spec;  // input convolution: in_channels -> J over the slice axes
  Parameter w_r, w_z, w;  // (J, I, kernel...)
  Parameter u_r, u_z, u;  // (J, J, kernel...)
  Parameter b_r, b_z, b;  // (J)

  // Zero-filled parameters named "<prefix>/w_r" etc.
  static CGruParams shaped(const ConvSpec& spec, const std::string& prefix);
  // Fixed order: w_r, w_z, w, u_r, u_z, u, b_r, b_z, b.
  std::vector<Parameter*> all();
};

// Multiplicative masks over the input kernels of one layer; shapes match
// w_r / w_z / w. Shared by all directions of the layer.
struct DropMasks {
  Tensor m_r, m_z, m;
};

// How the input kernels enter the graph: training masks, or a keep-probability
// scale for inference. Default is the raw weights.
struct WeightMode {
  const DropMasks* masks = nullptr;
  real scale = 1;
};

enum class Orientation { forward, backward };

struct Direction {
  int time_axis = 0;  // spatial axis index: 0 = x
  Orientation orient = Orientation::forward;
  CGruParams params;
};

struct MdGruLayer {
  int64_t stride = 2;
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  real dropconnect_rate = 0.5;
  // Fixed order: axis 0 forward, axis 0 backward, axis 1 forward, ...
  std::vector<Direction> directions;

  static MdGruLayer make(const std::string& prefix, int spatial_rank, int64_t in_channels,
                         int64_t out_channels, int64_t stride, int64_t kernel_extent,
                         real dropconnect_rate);
  std::vector<Parameter*> all_params();
};

// One recurrence step. x_t: (I, slice extents...) at full resolution;
// h_prev: (J, slice extents / stride...). Returns h_t at the same shape as
// h_prev. Places the direction's parameters on the tape each call, so looping
// over steps shares weights by accumulation.
Var cgru_step(Tape& tp, Var x_t, Var h_prev, CGruParams& p, const WeightMode& mode = {});

// Full sweep of `volume` (I, spatial extents...) along time_axis in the given
// orientation, mean-pooled along time by pool_stride. Pooled output index t'
// always corresponds to ascending volume coordinates, regardless of
// orientation. Output shape: (J, extents with slice axes / conv stride and
// the time axis / pool_stride). The strided input convolutions for all steps
// are computed in one pass; this matches the per-step path bit for bit.
Var cgru_sequence(Tape& tp, Var volume, CGruParams& p, int time_axis, Orientation orient,
                  int64_t pool_stride, const WeightMode& mode = {});

// Sum of all direction sweeps in the layer's fixed order. When training,
// `masks` (if non-null) is applied to every direction's input kernels; at
// inference the input kernels are scaled by 1 - dropconnect_rate instead.
Var mdgru_forward(Tape& tp, Var volume, MdGruLayer& layer, bool training,
                  const DropMasks* masks = nullptr);

}  // namespace mdgru
