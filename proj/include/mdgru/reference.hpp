// Serial reference kernels: plain nested loops with explicit zero padding.
//
// These are deliberately independent of the kernels in kernels.cpp. Tests use
// them as oracles and the benchmark compares against them; they are not on
// any production code path.
#pragma once

#include <span>

#include "mdgru/tensor.hpp"

namespace mdgru::ref {

// Strided "same" convolution, channel-first layout, optional per-channel bias.
Tensor conv_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                    std::span<const int64_t> strides);

// Mean over groups of `stride` entries along axis 0.
Tensor avg_pool0(const Tensor& x, int64_t stride);

// y = W x + b.
Tensor matvec(const Tensor& w, const Tensor& x, const Tensor* b);

}  // namespace mdgru::ref
