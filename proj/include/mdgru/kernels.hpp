// Low-level numeric kernels, OpenMP-parallel across output elements.
//
// Every kernel assigns each output element to exactly one thread and reduces
// its contributions in a fixed order, so results are bit-identical for any
// thread count. Gradient kernels accumulate (+=) into their destination.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdgru/tensor.hpp"

namespace mdgru {

// Geometry of a strided "same"-padded convolution.
// Tensors are channel-first: input (Ci, S...), weights (Co, Ci, K...),
// output (Co, S/stride...). Kernel extents must be odd; every input extent
// must be divisible by its stride.
struct ConvSpec {
  std::vector<int64_t> strides;
  std::vector<int64_t> kernel_extents;
  int64_t in_channels = 0;
  int64_t out_channels = 0;

  void validate() const;
};

namespace kernels {

struct ConvGeom {
  int sd = 0;  // spatial rank (1..3)
  int64_t ci = 0, co = 0;
  int64_t isp[3] = {1, 1, 1};
  int64_t osp[3] = {1, 1, 1};
  int64_t ker[3] = {1, 1, 1};
  int64_t str[3] = {1, 1, 1};
  int64_t pad[3] = {0, 0, 0};

  int64_t in_spatial_size() const { return isp[0] * isp[1] * isp[2]; }
  int64_t out_spatial_size() const { return osp[0] * osp[1] * osp[2]; }
  int64_t kernel_size() const { return ker[0] * ker[1] * ker[2]; }
  std::vector<int64_t> out_shape() const;
};

// Validates shapes and builds geometry. Throws Shape/Dimension errors.
ConvGeom make_conv_geom(std::span<const int64_t> x_shape, std::span<const int64_t> w_shape,
                        std::span<const int64_t> strides);

void conv_forward(const ConvGeom& g, const real* x, const real* w, const real* bias, real* out);
void conv_bwd_input(const ConvGeom& g, const real* gout, const real* w, real* gx);
void conv_bwd_weight(const ConvGeom& g, const real* gout, const real* x, real* gw);
void conv_bwd_bias(const ConvGeom& g, const real* gout, real* gb);

// Mean over groups of `stride` consecutive entries along axis 0.
void avg_pool0(int64_t t_in, int64_t rest, int64_t stride, const real* x, real* out);
void avg_pool0_bwd(int64_t t_in, int64_t rest, int64_t stride, const real* gout, real* gx);

// y = W x + b with W of shape (rows, cols); b may be null.
void matvec(int64_t rows, int64_t cols, const real* w, const real* x, const real* b, real* y);
void matvec_bwd_x(int64_t rows, int64_t cols, const real* w, const real* gy, real* gx);
void matvec_bwd_w(int64_t rows, int64_t cols, const real* gy, const real* x, real* gw);

// Elementwise application, parallel when large.
template <class F>
void map(int64_t n, const real* x, real* out, F f) {
#pragma omp parallel for schedule(static) if (n > 16384)
  for (int64_t i = 0; i < n; ++i) out[i] = f(x[i]);
}

template <class F>
void zip(int64_t n, const real* a, const real* b, real* out, F f) {
#pragma omp parallel for schedule(static) if (n > 16384)
  for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

// out[i] += a[i] * b[i]
void add_prod(int64_t n, const real* a, const real* b, real* out);
// out[i] += k * a[i]
void axpy(int64_t n, real k, const real* a, real* out);

// 1-D Gaussian blur along one axis of a 3-D scalar volume (X,Y,Z row-major),
// symmetric-reflect boundary. `kern` holds 2r+1 normalized taps.
void blur_axis(const int64_t dims[3], int axis, std::span<const real> kern, const real* in,
               real* out);

}  // namespace kernels
}  // namespace mdgru
