// Central finite-difference gradient verification, plus a named suite of
// checks covering every differentiable building block up to a miniature
// coarse-stage network.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdgru/tape.hpp"

namespace mdgru {

// Compares backward-pass gradients of the scalar `build` output against
// (f(x+h) - f(x-h)) / 2h per parameter element. `max_elements_per_param`
// limits the probed elements per tensor (0 = all, evenly spaced otherwise).
// Relative error uses max(1e-6, |analytic|, |fd|) as denominator.
// `inject_fault` perturbs one analytic gradient before comparing, to prove
// the check can fail.
double max_relative_grad_error(const std::function<Var(Tape&)>& build,
                               const std::vector<Parameter*>& params, double h,
                               int64_t max_elements_per_param, bool inject_fault = false);

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0;
  int64_t elements = 0;  // parameter elements probed
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double tolerance = 1e-4;
  bool passed = false;
};

// Runs the full suite: elementwise op chain, fully connected + softmax +
// cross entropy, strided convolution, one C-GRU step, a C-GRU sweep, a full
// multi-directional layer, and a miniature coarse network (strided input
// convolution into an 8^3 localization net). h = 1e-5.
// max_elements_per_param = 0 probes every element.
GradCheckReport run_gradcheck(bool inject_fault, int64_t max_elements_per_param = 0);

}  // namespace mdgru
