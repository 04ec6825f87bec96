#include "mdgru/optim.hpp"

#include <cmath>

namespace mdgru {

namespace {

Tensor uniform_tensor(const std::vector<int64_t>& shape, real bound, Rng& rng) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<real>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
  }
  return t;
}

int64_t kernel_volume(const std::vector<int64_t>& kernel_shape) {
  // (out, in, kernel...) -> product of the kernel extents.
  int64_t v = 1;
  for (size_t i = 2; i < kernel_shape.size(); ++i) v *= kernel_shape[i];
  return v;
}

void init_conv_kernel(Parameter& p, Rng& rng) {
  const auto& s = p.value.shape();
  const int64_t kv = kernel_volume(s);
  p.value = glorot_uniform(s, s[1] * kv, s[0] * kv, rng);
}

void init_cgru(CGruParams& p, Rng& rng) {
  init_conv_kernel(p.w_r, rng);
  init_conv_kernel(p.w_z, rng);
  init_conv_kernel(p.w, rng);
  init_conv_kernel(p.u_r, rng);
  init_conv_kernel(p.u_z, rng);
  init_conv_kernel(p.u, rng);
  p.b_r.value.fill(0);
  p.b_z.value.fill(0);
  p.b.value.fill(0);
}

}  // namespace

Tensor glorot_uniform(const std::vector<int64_t>& shape, int64_t fan_in, int64_t fan_out,
                      Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw_config("glorot_uniform: fans must be positive");
  const real bound =
      static_cast<real>(std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out))));
  return uniform_tensor(shape, bound, rng);
}

Tensor fc_uniform(const std::vector<int64_t>& shape, int64_t n_inputs, Rng& rng) {
  if (n_inputs < 1) throw_config("fc_uniform: n_inputs must be positive");
  const real bound = static_cast<real>(std::sqrt(3.0) / static_cast<double>(n_inputs));
  return uniform_tensor(shape, bound, rng);
}

void init_locnet(LocNet& net, Rng& rng) {
  for (MdGruLayer& layer : net.mdgru) {
    for (Direction& d : layer.directions) init_cgru(d.params, rng);
  }
  for (size_t c = 0; c < net.pw_w.size(); ++c) {
    init_conv_kernel(net.pw_w[c], rng);
    net.pw_b[c].value.fill(0);
  }
  net.fc1_w.value = fc_uniform(net.fc1_w.value.shape(), net.fc1_w.value.extent(1), rng);
  net.fc1_b.value.fill(0);
  net.fc2_w.value = fc_uniform(net.fc2_w.value.shape(), net.fc2_w.value.extent(1), rng);
  net.fc2_b.value.fill(0);
}

void init_coarse_model(CoarseModel& m, Rng& rng) {
  init_conv_kernel(m.in_w, rng);
  m.in_b.value.fill(0);
  init_locnet(m.net, rng);
}

void init_fine_model(FineModel& m, Rng& rng) { init_locnet(m.net, rng); }

AdaDeltaState AdaDeltaState::make(const std::vector<Parameter*>& params, real rho, real eps,
                                  real lambda) {
  AdaDeltaState st;
  st.rho = rho;
  st.eps = eps;
  st.lambda = lambda;
  for (const Parameter* p : params) {
    st.eg2.emplace_back(p->value.shape());
    st.edx2.emplace_back(p->value.shape());
  }
  return st;
}

void adadelta_step(const std::vector<Parameter*>& params, AdaDeltaState& st) {
  if (params.size() != st.eg2.size()) {
    throw_state("adadelta_step: state tracks " + std::to_string(st.eg2.size()) +
                " parameters, got " + std::to_string(params.size()));
  }
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    Tensor& eg2 = st.eg2[pi];
    Tensor& edx2 = st.edx2[pi];
    if (!p.grad.same_shape(p.value) || !eg2.same_shape(p.value)) {
      throw_shape("adadelta_step: shape mismatch for " + p.name);
    }
    const int64_t n = p.value.size();
    for (int64_t i = 0; i < n; ++i) {
      const real g = p.grad[i];
      if (!std::isfinite(g)) {
        throw_error(ErrorKind::Runtime,
                    "adadelta_step: non-finite gradient in " + p.name + " at element " +
                        std::to_string(i));
      }
      eg2[i] = st.rho * eg2[i] + (1 - st.rho) * g * g;
      const real dx = -(std::sqrt(edx2[i] + st.eps) / std::sqrt(eg2[i] + st.eps)) * g;
      edx2[i] = st.rho * edx2[i] + (1 - st.rho) * dx * dx;
      p.value[i] += st.lambda * dx;
    }
  }
}

}  // namespace mdgru
