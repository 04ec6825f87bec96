#include "mdgru/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mdgru/optim.hpp"
#include "mdgru/rng.hpp"

namespace mdgru {

namespace {

void fill_uniform(Tensor& t, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<real>(rng.uniform(lo, hi));
}

double eval(const std::function<Var(Tape&)>& build) {
  Tape tp(false);
  Var loss = build(tp);
  return static_cast<double>(tp.val(loss).data()[0]);
}

std::vector<int64_t> probe_indices(int64_t size, int64_t max_elements) {
  if (max_elements <= 0 || size <= max_elements) {
    std::vector<int64_t> all(static_cast<size_t>(size));
    for (int64_t i = 0; i < size; ++i) all[static_cast<size_t>(i)] = i;
    return all;
  }
  std::vector<int64_t> picked(static_cast<size_t>(max_elements));
  for (int64_t k = 0; k < max_elements; ++k) {
    picked[static_cast<size_t>(k)] = k * size / max_elements;
  }
  return picked;
}

}  // namespace

double max_relative_grad_error(const std::function<Var(Tape&)>& build,
                               const std::vector<Parameter*>& params, double h,
                               int64_t max_elements_per_param, bool inject_fault) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tp(true);
    Var loss = build(tp);
    tp.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  if (inject_fault) {
    bool done = false;
    for (Tensor& g : analytic) {
      for (int64_t i = 0; i < g.size() && !done; ++i) {
        if (std::abs(static_cast<double>(g.data()[i])) > 0) {
          g.data()[i] = g.data()[i] * real(1.5) + real(0.25);
          done = true;
        }
      }
      if (done) break;
    }
    if (!done && !analytic.empty() && analytic[0].size() > 0) analytic[0].data()[0] = real(0.25);
  }

  double max_rel = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int64_t j : probe_indices(p->value.size(), max_elements_per_param)) {
      const real saved = p->value.data()[j];
      p->value.data()[j] = saved + static_cast<real>(h);
      const double lp = eval(build);
      p->value.data()[j] = saved - static_cast<real>(h);
      const double lm = eval(build);
      p->value.data()[j] = saved;
      const double fd = (lp - lm) / (2 * h);
      const double a = static_cast<double>(analytic[pi].data()[j]);
      const double denom = std::max({1e-6, std::abs(a), std::abs(fd)});
      max_rel = std::max(max_rel, std::abs(a - fd) / denom);
    }
  }
  return max_rel;
}

namespace {

int64_t probed_elements(const std::vector<Parameter*>& params, int64_t max_elements) {
  int64_t n = 0;
  for (const Parameter* p : params) {
    n += static_cast<int64_t>(probe_indices(p->value.size(), max_elements).size());
  }
  return n;
}

GradCheckCase run_case(const std::string& name, const std::function<Var(Tape&)>& build,
                       const std::vector<Parameter*>& params, int64_t max_elements,
                       bool inject) {
  GradCheckCase c;
  c.name = name;
  c.max_rel_err = max_relative_grad_error(build, params, 1e-5, max_elements, inject);
  c.elements = probed_elements(params, max_elements);
  return c;
}

}  // namespace

GradCheckReport run_gradcheck(bool inject_fault, int64_t max_elements_per_param) {
  GradCheckReport report;
  report.tolerance = 1e-4;
  const Rng root(0x6d6467727543484bULL);

  {
    // Elementwise chain: add, sub, mul, affine, sigmoid, tanh, lrelu, sum.
    Parameter a{"a", Tensor({2, 3})}, b{"b", Tensor({2, 3})};
    Rng rng = root.stream("elementwise");
    fill_uniform(a.value, rng, -1.0, 1.0);
    fill_uniform(b.value, rng, -1.0, 1.0);
    auto build = [&](Tape& tp) {
      Var va = tp.parameter(a), vb = tp.parameter(b);
      Var m = ops::mul(tp, ops::tanh(tp, va), ops::sigmoid(tp, vb));
      Var d = ops::lrelu(tp, ops::sub(tp, va, vb), real(0.01));
      Var s = ops::add(tp, m, ops::affine(tp, d, real(2.0), real(0.3)));
      return ops::sum_all(tp, s);
    };
    report.cases.push_back(
        run_case("elementwise_chain", build, {&a, &b}, max_elements_per_param, inject_fault));
  }

  {
    // Two stacked fully connected layers, softmax head, cross entropy.
    Parameter w1{"w1", Tensor({4, 5})}, b1{"b1", Tensor({4})};
    Parameter w2{"w2", Tensor({3, 4})}, b2{"b2", Tensor({3})};
    Parameter x{"x", Tensor({5})};
    Rng rng = root.stream("fc");
    for (Parameter* p : {&w1, &b1, &w2, &b2, &x}) fill_uniform(p->value, rng, -0.8, 0.8);
    auto build = [&](Tape& tp) {
      Var h = ops::lrelu(tp, ops::fc(tp, tp.parameter(x), tp.parameter(w1), tp.parameter(b1)),
                         real(0.01));
      Var logits = ops::fc(tp, h, tp.parameter(w2), tp.parameter(b2));
      return ops::cross_entropy(tp, ops::softmax(tp, logits), 1);
    };
    report.cases.push_back(run_case("fc_softmax_ce", build, {&w1, &b1, &w2, &b2, &x},
                                    max_elements_per_param, inject_fault));
  }

  {
    // Strided convolution with bias plus a same-size state convolution.
    ConvSpec spec;
    spec.in_channels = 1;
    spec.out_channels = 2;
    spec.kernel_extents = {3, 3, 3};
    spec.strides = {2, 2, 2};
    ConvSpec sspec;
    sspec.in_channels = 2;
    sspec.out_channels = 2;
    sspec.kernel_extents = {3, 3, 3};
    sspec.strides = {1, 1, 1};
    Parameter x{"x", Tensor({1, 4, 4, 4})};
    Parameter w{"w", Tensor({2, 1, 3, 3, 3})}, bias{"bias", Tensor({2})};
    Parameter u{"u", Tensor({2, 2, 3, 3, 3})};
    Rng rng = root.stream("conv");
    for (Parameter* p : {&x, &w, &bias, &u}) fill_uniform(p->value, rng);
    auto build = [&](Tape& tp) {
      Var y = ops::conv(tp, tp.parameter(x), tp.parameter(w), tp.parameter(bias), spec);
      Var z = ops::conv_state(tp, ops::tanh(tp, y), tp.parameter(u), sspec);
      return ops::sum_all(tp, z);
    };
    report.cases.push_back(
        run_case("conv_stride2", build, {&x, &w, &bias, &u}, max_elements_per_param, inject_fault));
  }

  ConvSpec gspec;
  gspec.in_channels = 1;
  gspec.out_channels = 2;
  gspec.kernel_extents = {3, 3};
  gspec.strides = {2, 2};

  {
    // One recurrence step, gradients through both the input and the state.
    CGruParams p = CGruParams::shaped(gspec, "step");
    Rng rng = root.stream("cgru_step");
    for (Parameter* q : p.all()) fill_uniform(q->value, rng);
    Parameter x{"x", Tensor({1, 4, 4})}, h0{"h0", Tensor({2, 2, 2})};
    fill_uniform(x.value, rng);
    fill_uniform(h0.value, rng);
    auto build = [&](Tape& tp) {
      Var h = cgru_step(tp, tp.parameter(x), tp.parameter(h0), p);
      return ops::sum_all(tp, ops::tanh(tp, h));
    };
    std::vector<Parameter*> params = p.all();
    params.push_back(&x);
    params.push_back(&h0);
    report.cases.push_back(
        run_case("cgru_step", build, params, max_elements_per_param, inject_fault));
  }

  {
    // Full sweep with pooling, backward orientation, weights shared over time.
    CGruParams p = CGruParams::shaped(gspec, "seq");
    Rng rng = root.stream("cgru_seq");
    for (Parameter* q : p.all()) fill_uniform(q->value, rng);
    Parameter x{"x", Tensor({1, 4, 4, 4})};
    fill_uniform(x.value, rng);
    auto build = [&](Tape& tp) {
      Var y = cgru_sequence(tp, tp.parameter(x), p, /*time_axis=*/1, Orientation::backward,
                            /*pool_stride=*/2);
      return ops::sum_all(tp, y);
    };
    std::vector<Parameter*> params = p.all();
    params.push_back(&x);
    report.cases.push_back(
        run_case("cgru_sequence", build, params, max_elements_per_param, inject_fault));
  }

  {
    // All six directions summed.
    MdGruLayer layer = MdGruLayer::make("layer", 3, 1, 2, 2, 3, real(0.5));
    Rng rng = root.stream("mdgru");
    for (Parameter* q : layer.all_params()) fill_uniform(q->value, rng);
    Parameter x{"x", Tensor({1, 4, 4, 4})};
    fill_uniform(x.value, rng);
    auto build = [&](Tape& tp) {
      Var y = mdgru_forward(tp, tp.parameter(x), layer, /*training=*/true);
      return ops::sum_all(tp, y);
    };
    std::vector<Parameter*> params = layer.all_params();
    params.push_back(&x);
    report.cases.push_back(
        run_case("mdgru_layer", build, params, max_elements_per_param, inject_fault));
  }

  {
    // Miniature coarse network: strided input convolution (16^3 -> 8^3) into
    // a full localization net with 2-channel layers and 8 classes per axis.
    PipelineConfig pcfg;
    pcfg.window_extents = {8, 8, 8};
    pcfg.coarse_factor = 2;
    pcfg.padded_extents = {16, 16, 16};
    pcfg.input_conv_channels = 2;
    NetProfile profile;
    profile.mdgru_channels = {2, 2, 2};
    profile.pointwise_channels = {2, 2, 2};
    profile.cgru_kernel = 3;
    profile.dropconnect_rate = real(0.5);
    CoarseModel m = CoarseModel::make(pcfg, profile);
    Rng rng = root.stream("miniature");
    init_coarse_model(m, rng);
    Tensor input({2, 16, 16, 16});
    fill_uniform(input, rng, -1.0, 1.0);
    const std::array<int64_t, 3> target{3, 5, 7};
    auto build = [&](Tape& tp) {
      Var x = tp.constant(input);
      Var sub = ops::conv(tp, x, tp.parameter(m.in_w), tp.parameter(m.in_b), m.input_spec);
      DistVars d = locnet_forward(tp, sub, m.net, /*training=*/true);
      return locnet_loss(tp, d, target);
    };
    report.cases.push_back(
        run_case("miniature_coarse", build, m.all_params(), max_elements_per_param, inject_fault));
  }

  report.passed = true;
  for (const GradCheckCase& c : report.cases) {
    if (!(c.max_rel_err < report.tolerance)) report.passed = false;
  }
  return report;
}

}  // namespace mdgru
