#include "mdgru/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mdgru/error.hpp"

namespace mdgru::ops {

namespace {

const Tensor& need_val(Tape& tp, Var v, const char* op) {
  if (!v.valid()) throw_state(std::string(op) + ": input variable is not on the tape");
  return tp.val(v);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw_shape(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

inline real sigmoid_scalar(real x) {
  if (x >= 0) {
    const real e = std::exp(-x);
    return 1 / (1 + e);
  }
  const real e = std::exp(x);
  return e / (1 + e);
}

}  // namespace

Var add(Tape& tp, Var a, Var b) {
  const Tensor& av = need_val(tp, a, "add");
  const Tensor& bv = need_val(tp, b, "add");
  check_same_shape(av, bv, "add");
  Tensor out(av.shape());
  kernels::zip(out.size(), av.data(), bv.data(), out.data(),
               [](real p, real q) { return p + q; });
  const bool needs = tp.needs_grad(a) || tp.needs_grad(b);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([a, b, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      if (t.needs_grad(a)) kernels::axpy(g.size(), 1, g.data(), t.grad(a).data());
      if (t.needs_grad(b)) kernels::axpy(g.size(), 1, g.data(), t.grad(b).data());
    });
  }
  return y;
}

Var sub(Tape& tp, Var a, Var b) {
  const Tensor& av = need_val(tp, a, "sub");
  const Tensor& bv = need_val(tp, b, "sub");
  check_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  kernels::zip(out.size(), av.data(), bv.data(), out.data(),
               [](real p, real q) { return p - q; });
  const bool needs = tp.needs_grad(a) || tp.needs_grad(b);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([a, b, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      if (t.needs_grad(a)) kernels::axpy(g.size(), 1, g.data(), t.grad(a).data());
      if (t.needs_grad(b)) kernels::axpy(g.size(), -1, g.data(), t.grad(b).data());
    });
  }
  return y;
}

Var mul(Tape& tp, Var a, Var b) {
  const Tensor& av = need_val(tp, a, "mul");
  const Tensor& bv = need_val(tp, b, "mul");
  check_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  kernels::zip(out.size(), av.data(), bv.data(), out.data(),
               [](real p, real q) { return p * q; });
  const bool needs = tp.needs_grad(a) || tp.needs_grad(b);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([a, b, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      if (t.needs_grad(a)) kernels::add_prod(g.size(), g.data(), t.val(b).data(), t.grad(a).data());
      if (t.needs_grad(b)) kernels::add_prod(g.size(), g.data(), t.val(a).data(), t.grad(b).data());
    });
  }
  return y;
}

Var affine(Tape& tp, Var x, real k, real c) {
  const Tensor& xv = need_val(tp, x, "affine");
  Tensor out(xv.shape());
  kernels::map(out.size(), xv.data(), out.data(), [k, c](real v) { return k * v + c; });
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, k](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      kernels::axpy(g.size(), k, g.data(), t.grad(x).data());
    });
  }
  return y;
}

Var sigmoid(Tape& tp, Var x) {
  const Tensor& xv = need_val(tp, x, "sigmoid");
  Tensor out(xv.shape());
  kernels::map(out.size(), xv.data(), out.data(), sigmoid_scalar);
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      const real* gp = g.data();
      const real* sp = t.val(y).data();
      real* gx = t.grad(x).data();
      const int64_t n = g.size();
#pragma omp parallel for schedule(static) if (n > 16384)
      for (int64_t i = 0; i < n; ++i) gx[i] += gp[i] * sp[i] * (1 - sp[i]);
    });
  }
  return y;
}

Var tanh(Tape& tp, Var x) {
  const Tensor& xv = need_val(tp, x, "tanh");
  Tensor out(xv.shape());
  kernels::map(out.size(), xv.data(), out.data(), [](real v) { return std::tanh(v); });
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      const real* gp = g.data();
      const real* hp = t.val(y).data();
      real* gx = t.grad(x).data();
      const int64_t n = g.size();
#pragma omp parallel for schedule(static) if (n > 16384)
      for (int64_t i = 0; i < n; ++i) gx[i] += gp[i] * (1 - hp[i] * hp[i]);
    });
  }
  return y;
}

Var lrelu(Tape& tp, Var x, real slope) {
  const Tensor& xv = need_val(tp, x, "lrelu");
  Tensor out(xv.shape());
  kernels::map(out.size(), xv.data(), out.data(),
               [slope](real v) { return v >= 0 ? v : slope * v; });
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, slope](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      const real* gp = g.data();
      const real* xp = t.val(x).data();
      real* gx = t.grad(x).data();
      const int64_t n = g.size();
#pragma omp parallel for schedule(static) if (n > 16384)
      for (int64_t i = 0; i < n; ++i) gx[i] += gp[i] * (xp[i] >= 0 ? real(1) : slope);
    });
  }
  return y;
}

Var conv(Tape& tp, Var x, Var w, Var bias, const ConvSpec& spec) {
  const Tensor& xv = need_val(tp, x, "conv");
  const Tensor& wv = need_val(tp, w, "conv");
  spec.validate();
  const kernels::ConvGeom g = kernels::make_conv_geom(xv.shape(), wv.shape(), spec.strides);
  if (g.ci != spec.in_channels || g.co != spec.out_channels) {
    throw_shape("conv: tensor channels (" + std::to_string(g.ci) + " -> " + std::to_string(g.co) +
                ") disagree with spec (" + std::to_string(spec.in_channels) + " -> " +
                std::to_string(spec.out_channels) + ")");
  }
  const real* bp = nullptr;
  if (bias.valid()) {
    const Tensor& bv = tp.val(bias);
    if (bv.rank() != 1 || bv.size() != g.co) {
      throw_shape("conv: bias shape " + bv.shape_str() + " vs " + std::to_string(g.co) +
                  " output channels");
    }
    bp = bv.data();
  }
  Tensor out(g.out_shape());
  kernels::conv_forward(g, xv.data(), wv.data(), bp, out.data());
  const bool needs =
      tp.needs_grad(x) || tp.needs_grad(w) || (bias.valid() && tp.needs_grad(bias));
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, w, bias, y, g](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& go = t.grad(y);
      if (t.needs_grad(x)) kernels::conv_bwd_input(g, go.data(), t.val(w).data(), t.grad(x).data());
      if (t.needs_grad(w))
        kernels::conv_bwd_weight(g, go.data(), t.val(x).data(), t.grad(w).data());
      if (bias.valid() && t.needs_grad(bias))
        kernels::conv_bwd_bias(g, go.data(), t.grad(bias).data());
    });
  }
  return y;
}

Var conv_state(Tape& tp, Var h, Var u, const ConvSpec& spec) {
  ConvSpec unit = spec;
  std::fill(unit.strides.begin(), unit.strides.end(), int64_t{1});
  return conv(tp, h, u, Var{}, unit);
}

Var avg_pool0(Tape& tp, Var x, int64_t stride) {
  const Tensor& xv = need_val(tp, x, "avg_pool0");
  if (xv.rank() < 1) throw_shape("avg_pool0: rank must be >= 1");
  if (stride < 1) throw_dim("avg_pool0: stride must be >= 1");
  const int64_t t_in = xv.extent(0);
  if (t_in % stride != 0) {
    throw_dim("avg_pool0: leading extent " + std::to_string(t_in) +
              " not divisible by stride " + std::to_string(stride));
  }
  const int64_t rest = xv.size() / t_in;
  std::vector<int64_t> oshape = xv.shape();
  oshape[0] = t_in / stride;
  Tensor out(oshape);
  kernels::avg_pool0(t_in, rest, stride, xv.data(), out.data());
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, t_in, rest, stride](Tape& t) {
      if (!t.has_grad(y)) return;
      kernels::avg_pool0_bwd(t_in, rest, stride, t.grad(y).data(), t.grad(x).data());
    });
  }
  return y;
}

Var slice_axis(Tape& tp, Var x, int64_t axis, int64_t index) {
  const Tensor& xv = need_val(tp, x, "slice_axis");
  if (axis < 0 || axis >= xv.rank()) {
    throw_index("slice_axis: axis " + std::to_string(axis) + " out of range for rank " +
                std::to_string(xv.rank()));
  }
  const int64_t extent = xv.extent(static_cast<int>(axis));
  if (index < 0 || index >= extent) {
    throw_index("slice_axis: index " + std::to_string(index) + " out of range [0, " +
                std::to_string(extent) + ")");
  }
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= xv.extent(static_cast<int>(d));
  for (int64_t d = axis + 1; d < xv.rank(); ++d) inner *= xv.extent(static_cast<int>(d));
  std::vector<int64_t> oshape;
  for (int64_t d = 0; d < xv.rank(); ++d) {
    if (d != axis) oshape.push_back(xv.extent(static_cast<int>(d)));
  }
  if (oshape.empty()) oshape.push_back(1);
  Tensor out(oshape);
  const real* xp = xv.data();
  real* op = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(op + o * inner, xp + (o * extent + index) * inner,
                static_cast<size_t>(inner) * sizeof(real));
  }
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, outer, inner, extent, index](Tape& t) {
      if (!t.has_grad(y)) return;
      const real* g = t.grad(y).data();
      real* gx = t.grad(x).data();
      for (int64_t o = 0; o < outer; ++o) {
        kernels::axpy(inner, 1, g + o * inner, gx + (o * extent + index) * inner);
      }
    });
  }
  return y;
}

Var slice_range0(Tape& tp, Var x, int64_t start, int64_t len) {
  const Tensor& xv = need_val(tp, x, "slice_range0");
  if (xv.rank() != 1) throw_shape("slice_range0: expects a 1-D tensor, got " + xv.shape_str());
  if (start < 0 || len < 1 || start + len > xv.size()) {
    throw_index("slice_range0: range [" + std::to_string(start) + ", " +
                std::to_string(start + len) + ") out of bounds for size " +
                std::to_string(xv.size()));
  }
  Tensor out({len});
  std::memcpy(out.data(), xv.data() + start, static_cast<size_t>(len) * sizeof(real));
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, start, len](Tape& t) {
      if (!t.has_grad(y)) return;
      kernels::axpy(len, 1, t.grad(y).data(), t.grad(x).data() + start);
    });
  }
  return y;
}

Var stack0(Tape& tp, const std::vector<Var>& xs) {
  if (xs.empty()) throw_shape("stack0: nothing to stack");
  const Tensor& first = need_val(tp, xs[0], "stack0");
  bool needs = false;
  for (Var v : xs) {
    check_same_shape(first, need_val(tp, v, "stack0"), "stack0");
    needs = needs || tp.needs_grad(v);
  }
  const int64_t block = first.size();
  std::vector<int64_t> oshape;
  oshape.push_back(static_cast<int64_t>(xs.size()));
  for (int64_t e : first.shape()) oshape.push_back(e);
  Tensor out(oshape);
  for (size_t i = 0; i < xs.size(); ++i) {
    std::memcpy(out.data() + static_cast<int64_t>(i) * block, tp.val(xs[i]).data(),
                static_cast<size_t>(block) * sizeof(real));
  }
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([xs, y, block](Tape& t) {
      if (!t.has_grad(y)) return;
      const real* g = t.grad(y).data();
      for (size_t i = 0; i < xs.size(); ++i) {
        if (t.needs_grad(xs[i])) {
          kernels::axpy(block, 1, g + static_cast<int64_t>(i) * block, t.grad(xs[i]).data());
        }
      }
    });
  }
  return y;
}

Var move_axis0(Tape& tp, Var x, int64_t dest) {
  const Tensor& xv = need_val(tp, x, "move_axis0");
  if (dest < 0 || dest >= xv.rank()) {
    throw_index("move_axis0: destination " + std::to_string(dest) + " out of range for rank " +
                std::to_string(xv.rank()));
  }
  const int64_t t0 = xv.extent(0);
  int64_t pre = 1, post = 1;
  for (int64_t d = 1; d <= dest; ++d) pre *= xv.extent(static_cast<int>(d));
  for (int64_t d = dest + 1; d < xv.rank(); ++d) post *= xv.extent(static_cast<int>(d));
  std::vector<int64_t> oshape;
  for (int64_t d = 1; d <= dest; ++d) oshape.push_back(xv.extent(static_cast<int>(d)));
  oshape.push_back(t0);
  for (int64_t d = dest + 1; d < xv.rank(); ++d) oshape.push_back(xv.extent(static_cast<int>(d)));
  Tensor out(oshape);
  const real* xp = xv.data();
  real* op = out.data();
  for (int64_t ti = 0; ti < t0; ++ti) {
    for (int64_t p = 0; p < pre; ++p) {
      std::memcpy(op + (p * t0 + ti) * post, xp + (ti * pre + p) * post,
                  static_cast<size_t>(post) * sizeof(real));
    }
  }
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, t0, pre, post](Tape& t) {
      if (!t.has_grad(y)) return;
      const real* g = t.grad(y).data();
      real* gx = t.grad(x).data();
      for (int64_t ti = 0; ti < t0; ++ti) {
        for (int64_t p = 0; p < pre; ++p) {
          kernels::axpy(post, 1, g + (p * t0 + ti) * post, gx + (ti * pre + p) * post);
        }
      }
    });
  }
  return y;
}

Var flatten_channels_last(Tape& tp, Var x) {
  const Tensor& xv = need_val(tp, x, "flatten_channels_last");
  if (xv.rank() < 2) {
    throw_shape("flatten_channels_last: expects (channels, spatial...), got " + xv.shape_str());
  }
  const int64_t c = xv.extent(0);
  const int64_t sp = xv.size() / c;
  Tensor out({xv.size()});
  const real* xp = xv.data();
  real* op = out.data();
#pragma omp parallel for schedule(static) if (sp * c > 16384)
  for (int64_t s = 0; s < sp; ++s) {
    for (int64_t ch = 0; ch < c; ++ch) op[s * c + ch] = xp[ch * sp + s];
  }
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, c, sp](Tape& t) {
      if (!t.has_grad(y)) return;
      const real* g = t.grad(y).data();
      real* gx = t.grad(x).data();
#pragma omp parallel for schedule(static) if (sp * c > 16384)
      for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t s = 0; s < sp; ++s) gx[ch * sp + s] += g[s * c + ch];
      }
    });
  }
  return y;
}

Var reshape(Tape& tp, Var x, const std::vector<int64_t>& shape) {
  const Tensor& xv = need_val(tp, x, "reshape");
  if (Tensor::shape_product(shape) != xv.size()) {
    throw_shape("reshape: size mismatch " + xv.shape_str() + " -> " + shape_to_string(shape));
  }
  Tensor out(shape, xv.vec());
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      kernels::axpy(g.size(), 1, g.data(), t.grad(x).data());
    });
  }
  return y;
}

Var fc(Tape& tp, Var x, Var w, Var b) {
  const Tensor& xv = need_val(tp, x, "fc");
  const Tensor& wv = need_val(tp, w, "fc");
  if (xv.rank() != 1) throw_shape("fc: input must be 1-D, got " + xv.shape_str());
  if (wv.rank() != 2 || wv.extent(1) != xv.size()) {
    throw_shape("fc: weight " + wv.shape_str() + " vs input " + xv.shape_str());
  }
  const int64_t rows = wv.extent(0);
  const int64_t cols = wv.extent(1);
  const real* bp = nullptr;
  if (b.valid()) {
    const Tensor& bv = tp.val(b);
    if (bv.rank() != 1 || bv.size() != rows) {
      throw_shape("fc: bias " + bv.shape_str() + " vs " + std::to_string(rows) + " rows");
    }
    bp = bv.data();
  }
  Tensor out({rows});
  kernels::matvec(rows, cols, wv.data(), xv.data(), bp, out.data());
  const bool needs = tp.needs_grad(x) || tp.needs_grad(w) || (b.valid() && tp.needs_grad(b));
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, w, b, y, rows, cols](Tape& t) {
      if (!t.has_grad(y)) return;
      const Tensor& g = t.grad(y);
      if (t.needs_grad(x)) kernels::matvec_bwd_x(rows, cols, t.val(w).data(), g.data(), t.grad(x).data());
      if (t.needs_grad(w)) kernels::matvec_bwd_w(rows, cols, g.data(), t.val(x).data(), t.grad(w).data());
      if (b.valid() && t.needs_grad(b)) kernels::axpy(rows, 1, g.data(), t.grad(b).data());
    });
  }
  return y;
}

Var softmax(Tape& tp, Var x) {
  const Tensor& xv = need_val(tp, x, "softmax");
  if (xv.rank() != 1 || xv.size() < 1) {
    throw_shape("softmax: expects a non-empty 1-D tensor, got " + xv.shape_str());
  }
  const int64_t n = xv.size();
  Tensor out({n});
  real m = xv[0];
  for (int64_t i = 1; i < n; ++i) m = std::max(m, xv[i]);
  real s = 0;
  for (int64_t i = 0; i < n; ++i) {
    out[i] = std::exp(xv[i] - m);
    s += out[i];
  }
  for (int64_t i = 0; i < n; ++i) out[i] /= s;
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([x, y, n](Tape& t) {
      if (!t.has_grad(y)) return;
      const real* g = t.grad(y).data();
      const real* p = t.val(y).data();
      real dot = 0;
      for (int64_t i = 0; i < n; ++i) dot += g[i] * p[i];
      real* gx = t.grad(x).data();
      for (int64_t i = 0; i < n; ++i) gx[i] += p[i] * (g[i] - dot);
    });
  }
  return y;
}

Var cross_entropy(Tape& tp, Var p, int64_t target) {
  const Tensor& pv = need_val(tp, p, "cross_entropy");
  if (pv.rank() != 1) throw_shape("cross_entropy: expects a 1-D tensor, got " + pv.shape_str());
  if (target < 0 || target >= pv.size()) {
    throw_index("cross_entropy: target " + std::to_string(target) + " out of range [0, " +
                std::to_string(pv.size()) + ")");
  }
  constexpr real kEps = real(1e-12);
  Tensor out = Tensor::scalar(-std::log(pv[target] + kEps));
  const bool needs = tp.needs_grad(p);
  Var y = tp.emit(std::move(out), needs);
  if (needs) {
    tp.record([p, y, target](Tape& t) {
      if (!t.has_grad(y)) return;
      const real g0 = t.grad(y)[0];
      const real pt = t.val(p)[target];
      t.grad(p)[target] += -g0 / (pt + kEps);
    });
  }
  return y;
}

Var sum_all(Tape& tp, Var x) {
  const Tensor& xv = need_val(tp, x, "sum_all");
  real s = 0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  const bool needs = tp.needs_grad(x);
  Var y = tp.emit(Tensor::scalar(s), needs);
  if (needs) {
    tp.record([x, y](Tape& t) {
      if (!t.has_grad(y)) return;
      const real g0 = t.grad(y)[0];
      Tensor& gx = t.grad(x);
      real* gp = gx.data();
      const int64_t n = gx.size();
      for (int64_t i = 0; i < n; ++i) gp[i] += g0;
    });
  }
  return y;
}

}  // namespace mdgru::ops
