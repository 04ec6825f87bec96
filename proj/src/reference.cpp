#include "mdgru/reference.hpp"

#include <vector>

namespace mdgru::ref {

Tensor conv_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                    std::span<const int64_t> strides) {
  const int sd = x.rank() - 1;
  if (sd < 1 || sd > 3 || w.rank() != sd + 2 || static_cast<int>(strides.size()) != sd) {
    throw_shape("ref::conv_forward: bad ranks");
  }
  const int64_t ci = x.extent(0);
  const int64_t co = w.extent(0);
  if (w.extent(1) != ci) throw_shape("ref::conv_forward: channel mismatch");

  // Normalize everything to 3 spatial axes with trailing singleton extents.
  int64_t isp[3] = {1, 1, 1}, ker[3] = {1, 1, 1}, str[3] = {1, 1, 1}, osp[3] = {1, 1, 1},
          pad[3] = {0, 0, 0};
  for (int d = 0; d < sd; ++d) {
    isp[d] = x.extent(d + 1);
    ker[d] = w.extent(d + 2);
    str[d] = strides[static_cast<size_t>(d)];
    if (ker[d] % 2 == 0) throw_dim("ref::conv_forward: even kernel extent");
    if (isp[d] % str[d] != 0) throw_dim("ref::conv_forward: extent not divisible by stride");
    osp[d] = isp[d] / str[d];
    pad[d] = (ker[d] - 1) / 2;
  }

  std::vector<int64_t> out_shape;
  out_shape.push_back(co);
  for (int d = 0; d < sd; ++d) out_shape.push_back(osp[d]);
  Tensor out(out_shape);

  for (int64_t j = 0; j < co; ++j) {
    for (int64_t q0 = 0; q0 < osp[0]; ++q0) {
      for (int64_t q1 = 0; q1 < osp[1]; ++q1) {
        for (int64_t q2 = 0; q2 < osp[2]; ++q2) {
          real acc = 0;
          for (int64_t i = 0; i < ci; ++i) {
            for (int64_t k0 = 0; k0 < ker[0]; ++k0) {
              for (int64_t k1 = 0; k1 < ker[1]; ++k1) {
                for (int64_t k2 = 0; k2 < ker[2]; ++k2) {
                  const int64_t p0 = q0 * str[0] + k0 - pad[0];
                  const int64_t p1 = q1 * str[1] + k1 - pad[1];
                  const int64_t p2 = q2 * str[2] + k2 - pad[2];
                  real xv = 0;
                  if (p0 >= 0 && p0 < isp[0] && p1 >= 0 && p1 < isp[1] && p2 >= 0 &&
                      p2 < isp[2]) {
                    xv = x[((i * isp[0] + p0) * isp[1] + p1) * isp[2] + p2];
                  }
                  const real wv =
                      w[(((j * ci + i) * ker[0] + k0) * ker[1] + k1) * ker[2] + k2];
                  acc += wv * xv;
                }
              }
            }
          }
          if (bias) acc += (*bias)[j];
          out[((j * osp[0] + q0) * osp[1] + q1) * osp[2] + q2] = acc;
        }
      }
    }
  }
  return out;
}

Tensor avg_pool0(const Tensor& x, int64_t stride) {
  if (x.rank() < 1) throw_shape("ref::avg_pool0: rank 0");
  const int64_t t_in = x.extent(0);
  if (t_in % stride != 0) throw_dim("ref::avg_pool0: length not divisible by stride");
  std::vector<int64_t> shape = x.shape();
  shape[0] = t_in / stride;
  Tensor out(shape);
  const int64_t rest = x.size() / t_in;
  for (int64_t tp = 0; tp < shape[0]; ++tp) {
    for (int64_t r = 0; r < rest; ++r) {
      real acc = 0;
      for (int64_t s = 0; s < stride; ++s) acc += x[(tp * stride + s) * rest + r];
      out[tp * rest + r] = acc / static_cast<real>(stride);
    }
  }
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& x, const Tensor* b) {
  if (w.rank() != 2 || x.rank() != 1 || w.extent(1) != x.extent(0)) {
    throw_shape("ref::matvec: bad shapes");
  }
  Tensor y({w.extent(0)});
  for (int64_t o = 0; o < w.extent(0); ++o) {
    real acc = 0;
    for (int64_t i = 0; i < w.extent(1); ++i) acc += w[o * w.extent(1) + i] * x[i];
    y[o] = b ? acc + (*b)[o] : acc;
  }
  return y;
}

}  // namespace mdgru::ref
