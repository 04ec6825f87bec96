// Parameter initialization and the AdaDelta update rule.
#pragma once

#include <vector>

#include "mdgru/pipeline.hpp"
#include "mdgru/rng.hpp"
#include "mdgru/tape.hpp"

namespace mdgru {

// Uniform on [-sqrt(6/(fan_in+fan_out)), +...]; convolution fans count
// kernel volume times channels.
Tensor glorot_uniform(const std::vector<int64_t>& shape, int64_t fan_in, int64_t fan_out,
                      Rng& rng);

// Uniform on [-sqrt(3)/n_inputs, +sqrt(3)/n_inputs] for fully connected
// weights.
Tensor fc_uniform(const std::vector<int64_t>& shape, int64_t n_inputs, Rng& rng);

// Weights initialized as above, biases zero. Consumes `rng` in the fixed
// parameter order of the model.
void init_locnet(LocNet& net, Rng& rng);
void init_coarse_model(CoarseModel& m, Rng& rng);
void init_fine_model(FineModel& m, Rng& rng);

struct AdaDeltaState {
  real rho = real(0.95);
  real eps = real(1e-8);
  real lambda = real(0.001);
  std::vector<Tensor> eg2;   // running mean of squared gradients
  std::vector<Tensor> edx2;  // running mean of squared raw updates

  static AdaDeltaState make(const std::vector<Parameter*>& params, real rho, real eps,
                            real lambda);
};

// One update over params[i].grad, in order. Per element:
//   E[g^2]  <- rho E[g^2] + (1-rho) g^2
//   dx      = -(sqrt(E[dx^2]+eps) / sqrt(E[g^2]+eps)) g
//   E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
//   x       <- x + lambda dx
// A non-finite gradient aborts with a runtime error naming the parameter.
void adadelta_step(const std::vector<Parameter*>& params, AdaDeltaState& st);

}  // namespace mdgru
