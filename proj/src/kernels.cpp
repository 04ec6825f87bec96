#include "mdgru/kernels.hpp"

#include <algorithm>

namespace mdgru {

void ConvSpec::validate() const {
  if (strides.size() != kernel_extents.size()) {
    throw_shape("ConvSpec: strides rank " + std::to_string(strides.size()) +
                " vs kernel rank " + std::to_string(kernel_extents.size()));
  }
  if (strides.empty() || strides.size() > 3) {
    throw_shape("ConvSpec: spatial rank must be 1..3");
  }
  for (int64_t s : strides) {
    if (s < 1) throw_dim("ConvSpec: strides must be >= 1");
  }
  for (int64_t k : kernel_extents) {
    if (k < 1 || k % 2 == 0) throw_dim("ConvSpec: kernel extents must be odd and positive");
  }
  if (in_channels < 1 || out_channels < 1) throw_shape("ConvSpec: channels must be positive");
}

namespace kernels {

namespace {

inline int64_t ceil_div(int64_t n, int64_t d) {
  return n > 0 ? (n + d - 1) / d : n / d;
}

inline int64_t floor_div(int64_t n, int64_t d) {
  return n >= 0 ? n / d : -((-n + d - 1) / d);
}

}  // namespace

std::vector<int64_t> ConvGeom::out_shape() const {
  std::vector<int64_t> s;
  s.push_back(co);
  for (int d = 0; d < sd; ++d) s.push_back(osp[d]);
  return s;
}

ConvGeom make_conv_geom(std::span<const int64_t> x_shape, std::span<const int64_t> w_shape,
                        std::span<const int64_t> strides) {
  ConvGeom g;
  g.sd = static_cast<int>(x_shape.size()) - 1;
  if (g.sd < 1 || g.sd > 3) {
    throw_shape("conv: input rank must be 2..4 (channels + 1..3 spatial), got shape " +
                shape_to_string(x_shape));
  }
  if (static_cast<int>(w_shape.size()) != g.sd + 2) {
    throw_shape("conv: weight rank " + shape_to_string(w_shape) + " does not match input " +
                shape_to_string(x_shape));
  }
  if (static_cast<int>(strides.size()) != g.sd) {
    throw_shape("conv: stride rank " + std::to_string(strides.size()) + " vs spatial rank " +
                std::to_string(g.sd));
  }
  g.ci = x_shape[0];
  g.co = w_shape[0];
  if (w_shape[1] != g.ci) {
    throw_shape("conv: weight in-channels " + std::to_string(w_shape[1]) +
                " vs input channels " + std::to_string(g.ci));
  }
  for (int d = 0; d < g.sd; ++d) {
    g.isp[d] = x_shape[static_cast<size_t>(d) + 1];
    g.ker[d] = w_shape[static_cast<size_t>(d) + 2];
    g.str[d] = strides[static_cast<size_t>(d)];
    if (g.str[d] < 1) throw_dim("conv: stride must be >= 1");
    if (g.ker[d] < 1 || g.ker[d] % 2 == 0) {
      throw_dim("conv: kernel extents must be odd, got " + shape_to_string(w_shape));
    }
    if (g.isp[d] % g.str[d] != 0) {
      throw_dim("conv: input extent " + std::to_string(g.isp[d]) +
                " not divisible by stride " + std::to_string(g.str[d]) + " on axis " +
                std::to_string(d));
    }
    g.osp[d] = g.isp[d] / g.str[d];
    g.pad[d] = (g.ker[d] - 1) / 2;
  }
  return g;
}

namespace {

template <int D>
void conv_forward_impl(const ConvGeom& g, const real* x, const real* w, const real* bias,
                       real* out) {
  const int64_t isz = g.in_spatial_size();
  const int64_t osz = g.out_spatial_size();
  const int64_t ksz = g.kernel_size();
  const int64_t total = g.co * osz;

#pragma omp parallel for schedule(static)
  for (int64_t t = 0; t < total; ++t) {
    const int64_t j = t / osz;
    int64_t qf = t % osz;
    int64_t q[3] = {0, 0, 0};
    for (int d = D - 1; d >= 0; --d) {
      q[d] = qf % g.osp[d];
      qf /= g.osp[d];
    }
    int64_t base[3], klo[3], khi[3];
    for (int d = 0; d < D; ++d) {
      base[d] = q[d] * g.str[d] - g.pad[d];
      klo[d] = base[d] < 0 ? -base[d] : 0;
      khi[d] = std::min(g.ker[d], g.isp[d] - base[d]);
    }
    real acc = 0;
    for (int64_t i = 0; i < g.ci; ++i) {
      const real* xi = x + i * isz;
      const real* wji = w + (j * g.ci + i) * ksz;
      if constexpr (D == 1) {
        const real* xr = xi + base[0];
        for (int64_t k0 = klo[0]; k0 < khi[0]; ++k0) acc += wji[k0] * xr[k0];
      } else if constexpr (D == 2) {
        for (int64_t k0 = klo[0]; k0 < khi[0]; ++k0) {
          const real* xr = xi + (base[0] + k0) * g.isp[1] + base[1];
          const real* wr = wji + k0 * g.ker[1];
          for (int64_t k1 = klo[1]; k1 < khi[1]; ++k1) acc += wr[k1] * xr[k1];
        }
      } else {
        for (int64_t k0 = klo[0]; k0 < khi[0]; ++k0) {
          for (int64_t k1 = klo[1]; k1 < khi[1]; ++k1) {
            const real* xr =
                xi + ((base[0] + k0) * g.isp[1] + (base[1] + k1)) * g.isp[2] + base[2];
            const real* wr = wji + (k0 * g.ker[1] + k1) * g.ker[2];
            for (int64_t k2 = klo[2]; k2 < khi[2]; ++k2) acc += wr[k2] * xr[k2];
          }
        }
      }
    }
    out[t] = bias ? acc + bias[j] : acc;
  }
}

template <int D>
void conv_bwd_input_impl(const ConvGeom& g, const real* gout, const real* w, real* gx) {
  const int64_t isz = g.in_spatial_size();
  const int64_t osz = g.out_spatial_size();
  const int64_t ksz = g.kernel_size();
  const int64_t total = g.ci * isz;

#pragma omp parallel for schedule(static)
  for (int64_t t = 0; t < total; ++t) {
    const int64_t i = t / isz;
    int64_t pf = t % isz;
    int64_t p[3] = {0, 0, 0};
    for (int d = D - 1; d >= 0; --d) {
      p[d] = pf % g.isp[d];
      pf /= g.isp[d];
    }
    // Along each axis, output position q contributes via kernel tap
    // k = p + pad - q*stride when that tap exists.
    int64_t qlo[3], qhi[3], a[3];
    for (int d = 0; d < D; ++d) {
      a[d] = p[d] + g.pad[d];
      qlo[d] = std::max<int64_t>(0, ceil_div(a[d] - g.ker[d] + 1, g.str[d]));
      qhi[d] = std::min(g.osp[d] - 1, floor_div(a[d], g.str[d]));
    }
    real acc = 0;
    for (int64_t j = 0; j < g.co; ++j) {
      const real* gj = gout + j * osz;
      const real* wji = w + (j * g.ci + i) * ksz;
      if constexpr (D == 1) {
        for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
          acc += wji[a[0] - q0 * g.str[0]] * gj[q0];
        }
      } else if constexpr (D == 2) {
        for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
          const int64_t k0 = a[0] - q0 * g.str[0];
          const real* gr = gj + q0 * g.osp[1];
          const real* wr = wji + k0 * g.ker[1];
          for (int64_t q1 = qlo[1]; q1 <= qhi[1]; ++q1) {
            acc += wr[a[1] - q1 * g.str[1]] * gr[q1];
          }
        }
      } else {
        for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
          const int64_t k0 = a[0] - q0 * g.str[0];
          for (int64_t q1 = qlo[1]; q1 <= qhi[1]; ++q1) {
            const int64_t k1 = a[1] - q1 * g.str[1];
            const real* gr = gj + (q0 * g.osp[1] + q1) * g.osp[2];
            const real* wr = wji + (k0 * g.ker[1] + k1) * g.ker[2];
            for (int64_t q2 = qlo[2]; q2 <= qhi[2]; ++q2) {
              acc += wr[a[2] - q2 * g.str[2]] * gr[q2];
            }
          }
        }
      }
    }
    gx[t] += acc;
  }
}

template <int D>
void conv_bwd_weight_impl(const ConvGeom& g, const real* gout, const real* x, real* gw) {
  const int64_t isz = g.in_spatial_size();
  const int64_t osz = g.out_spatial_size();
  const int64_t ksz = g.kernel_size();
  const int64_t total = g.co * g.ci * ksz;

#pragma omp parallel for schedule(static)
  for (int64_t t = 0; t < total; ++t) {
    int64_t rem = t;
    const int64_t j = rem / (g.ci * ksz);
    rem %= g.ci * ksz;
    const int64_t i = rem / ksz;
    int64_t kf = rem % ksz;
    int64_t k[3] = {0, 0, 0};
    for (int d = D - 1; d >= 0; --d) {
      k[d] = kf % g.ker[d];
      kf /= g.ker[d];
    }
    // Valid output range along each axis: 0 <= q*stride + k - pad < isp.
    int64_t qlo[3], qhi[3], off[3];
    for (int d = 0; d < D; ++d) {
      off[d] = k[d] - g.pad[d];
      qlo[d] = std::max<int64_t>(0, ceil_div(-off[d], g.str[d]));
      qhi[d] = std::min(g.osp[d] - 1, floor_div(g.isp[d] - 1 - off[d], g.str[d]));
    }
    const real* gj = gout + j * osz;
    const real* xi = x + i * isz;
    real acc = 0;
    if constexpr (D == 1) {
      for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
        acc += gj[q0] * xi[q0 * g.str[0] + off[0]];
      }
    } else if constexpr (D == 2) {
      for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
        const real* gr = gj + q0 * g.osp[1];
        const real* xr = xi + (q0 * g.str[0] + off[0]) * g.isp[1] + off[1];
        for (int64_t q1 = qlo[1]; q1 <= qhi[1]; ++q1) {
          acc += gr[q1] * xr[q1 * g.str[1]];
        }
      }
    } else {
      for (int64_t q0 = qlo[0]; q0 <= qhi[0]; ++q0) {
        for (int64_t q1 = qlo[1]; q1 <= qhi[1]; ++q1) {
          const real* gr = gj + (q0 * g.osp[1] + q1) * g.osp[2];
          const real* xr = xi + ((q0 * g.str[0] + off[0]) * g.isp[1] + q1 * g.str[1] + off[1]) *
                                    g.isp[2] +
                           off[2];
          for (int64_t q2 = qlo[2]; q2 <= qhi[2]; ++q2) {
            acc += gr[q2] * xr[q2 * g.str[2]];
          }
        }
      }
    }
    gw[t] += acc;
  }
}

}  // namespace

void conv_forward(const ConvGeom& g, const real* x, const real* w, const real* bias, real* out) {
  switch (g.sd) {
    case 1: conv_forward_impl<1>(g, x, w, bias, out); break;
    case 2: conv_forward_impl<2>(g, x, w, bias, out); break;
    default: conv_forward_impl<3>(g, x, w, bias, out); break;
  }
}

void conv_bwd_input(const ConvGeom& g, const real* gout, const real* w, real* gx) {
  switch (g.sd) {
    case 1: conv_bwd_input_impl<1>(g, gout, w, gx); break;
    case 2: conv_bwd_input_impl<2>(g, gout, w, gx); break;
    default: conv_bwd_input_impl<3>(g, gout, w, gx); break;
  }
}

void conv_bwd_weight(const ConvGeom& g, const real* gout, const real* x, real* gw) {
  switch (g.sd) {
    case 1: conv_bwd_weight_impl<1>(g, gout, x, gw); break;
    case 2: conv_bwd_weight_impl<2>(g, gout, x, gw); break;
    default: conv_bwd_weight_impl<3>(g, gout, x, gw); break;
  }
}

void conv_bwd_bias(const ConvGeom& g, const real* gout, real* gb) {
  const int64_t osz = g.out_spatial_size();
#pragma omp parallel for schedule(static)
  for (int64_t j = 0; j < g.co; ++j) {
    const real* gj = gout + j * osz;
    real acc = 0;
    for (int64_t q = 0; q < osz; ++q) acc += gj[q];
    gb[j] += acc;
  }
}

void avg_pool0(int64_t t_in, int64_t rest, int64_t stride, const real* x, real* out) {
  const int64_t t_out = t_in / stride;
  const real inv = real(1) / static_cast<real>(stride);
  const int64_t total = t_out * rest;
#pragma omp parallel for schedule(static) if (total > 16384)
  for (int64_t t = 0; t < total; ++t) {
    const int64_t tp = t / rest;
    const int64_t r = t % rest;
    real acc = 0;
    for (int64_t s = 0; s < stride; ++s) acc += x[(tp * stride + s) * rest + r];
    out[t] = acc * inv;
  }
}

void avg_pool0_bwd(int64_t t_in, int64_t rest, int64_t stride, const real* gout, real* gx) {
  const real inv = real(1) / static_cast<real>(stride);
  const int64_t total = t_in * rest;
#pragma omp parallel for schedule(static) if (total > 16384)
  for (int64_t t = 0; t < total; ++t) {
    const int64_t ti = t / rest;
    const int64_t r = t % rest;
    gx[t] += gout[(ti / stride) * rest + r] * inv;
  }
}

void matvec(int64_t rows, int64_t cols, const real* w, const real* x, const real* b, real* y) {
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < rows; ++o) {
    const real* wr = w + o * cols;
    real acc = 0;
    for (int64_t i = 0; i < cols; ++i) acc += wr[i] * x[i];
    y[o] = b ? acc + b[o] : acc;
  }
}

void matvec_bwd_x(int64_t rows, int64_t cols, const real* w, const real* gy, real* gx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < cols; ++i) {
    real acc = 0;
    for (int64_t o = 0; o < rows; ++o) acc += w[o * cols + i] * gy[o];
    gx[i] += acc;
  }
}

void matvec_bwd_w(int64_t rows, int64_t cols, const real* gy, const real* x, real* gw) {
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < rows; ++o) {
    real* gr = gw + o * cols;
    const real g = gy[o];
    for (int64_t i = 0; i < cols; ++i) gr[i] += g * x[i];
  }
}

void add_prod(int64_t n, const real* a, const real* b, real* out) {
#pragma omp parallel for schedule(static) if (n > 16384)
  for (int64_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy(int64_t n, real k, const real* a, real* out) {
#pragma omp parallel for schedule(static) if (n > 16384)
  for (int64_t i = 0; i < n; ++i) out[i] += k * a[i];
}

namespace {
inline int64_t reflect_index(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}
}  // namespace

void blur_axis(const int64_t dims[3], int axis, std::span<const real> kern, const real* in,
               real* out) {
  const int64_t r = (static_cast<int64_t>(kern.size()) - 1) / 2;
  const int64_t n = dims[axis];
  int64_t stride = 1;
  for (int d = axis + 1; d < 3; ++d) stride *= dims[d];
  int64_t lines = 1;
  for (int d = 0; d < 3; ++d) {
    if (d != axis) lines *= dims[d];
  }

#pragma omp parallel for schedule(static)
  for (int64_t line = 0; line < lines; ++line) {
    // Decode line index into the two fixed coordinates.
    int64_t coord[3] = {0, 0, 0};
    int64_t rem = line;
    for (int d = 2; d >= 0; --d) {
      if (d == axis) continue;
      coord[d] = rem % dims[d];
      rem /= dims[d];
    }
    const int64_t base = (coord[0] * dims[1] + coord[1]) * dims[2] + coord[2];
    for (int64_t i = 0; i < n; ++i) {
      real acc = 0;
      for (int64_t k = -r; k <= r; ++k) {
        const int64_t src = reflect_index(i + k, n);
        acc += kern[static_cast<size_t>(k + r)] * in[base + src * stride];
      }
      out[base + i * stride] = acc;
    }
  }
}

}  // namespace kernels
}  // namespace mdgru
