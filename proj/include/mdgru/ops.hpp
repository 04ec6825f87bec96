// Differentiable operations. Each op computes its value eagerly and, when the
// tape is recording, registers a closure that routes gradients to its inputs.
#pragma once

#include <cstdint>
#include <vector>

#include "mdgru/kernels.hpp"
#include "mdgru/tape.hpp"

namespace mdgru::ops {

Var add(Tape& tp, Var a, Var b);
Var sub(Tape& tp, Var a, Var b);
Var mul(Tape& tp, Var a, Var b);
// k * x + c with scalar constants.
Var affine(Tape& tp, Var x, real k, real c);

Var sigmoid(Tape& tp, Var x);
Var tanh(Tape& tp, Var x);
Var lrelu(Tape& tp, Var x, real slope);

// Strided convolution of x (C_in, spatial...) with w
// (C_out, C_in, kernel...), optional bias (C_out). Pass Var{} for no bias.
// Output spatial extents are ceil(extent / stride).
Var conv(Tape& tp, Var x, Var w, Var bias, const ConvSpec& spec);
// Same-size convolution (all strides 1, no bias) used on recurrent state.
Var conv_state(Tape& tp, Var h, Var u, const ConvSpec& spec);

// Mean over consecutive groups of `stride` entries along axis 0.
Var avg_pool0(Tape& tp, Var x, int64_t stride);

// Drops `axis` by fixing it at `index`.
Var slice_axis(Tape& tp, Var x, int64_t axis, int64_t index);
// Contiguous slice [start, start + len) of a 1-D tensor.
Var slice_range0(Tape& tp, Var x, int64_t start, int64_t len);
// Stacks equally shaped tensors along a new leading axis.
Var stack0(Tape& tp, const std::vector<Var>& xs);
// Moves axis 0 to position `dest`, shifting the axes in between left.
Var move_axis0(Tape& tp, Var x, int64_t dest);
// (C, spatial...) -> flat vector ordered spatial-major, channel-fastest.
Var flatten_channels_last(Tape& tp, Var x);
// Same data, new shape; total size must match.
Var reshape(Tape& tp, Var x, const std::vector<int64_t>& shape);

// W (n_out, n_in) * x (n_in) + b (n_out). Pass Var{} for no bias.
Var fc(Tape& tp, Var x, Var w, Var b);

// Softmax over a 1-D tensor (max-subtracted).
Var softmax(Tape& tp, Var x);
// -log(p[target] + 1e-12) as a scalar.
Var cross_entropy(Tape& tp, Var p, int64_t target);

// Scalar sum of all entries, fixed accumulation order.
Var sum_all(Tape& tp, Var x);

}  // namespace mdgru::ops
