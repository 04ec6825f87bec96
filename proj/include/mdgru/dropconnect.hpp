// DropConnect over the C-GRU input kernels: Bernoulli masks during training,
// keep-probability scaling at inference. State kernels and biases are never
// masked.
#pragma once

#include "mdgru/locnet.hpp"
#include "mdgru/rng.hpp"

namespace mdgru {

// Independent Bernoulli(keep = 1 - rate) masks over w_r, w_z, w. Drawn once
// per training example per layer and reused across directions and time steps.
DropMasks dropconnect_sample(const CGruParams& p, real rate, Rng& rng);

// Masks for all three compositions of a localization net.
LocNetMasks locnet_masks(const LocNet& net, real rate, Rng& rng);

// Copy of the parameters with w_r, w_z, w scaled by (1 - rate); everything
// else untouched. Mean-field stand-in for mask averaging at inference.
CGruParams inference_weights(const CGruParams& p, real rate);

}  // namespace mdgru
