#include "mdgru/dropconnect.hpp"

namespace mdgru {

namespace {

Tensor bernoulli_mask(const std::vector<int64_t>& shape, real keep, Rng& rng) {
  Tensor m(shape);
  for (int64_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(static_cast<double>(keep)) ? real(1) : real(0);
  return m;
}

}  // namespace

DropMasks dropconnect_sample(const CGruParams& p, real rate, Rng& rng) {
  if (rate < 0 || rate > 1) throw_config("dropconnect: rate must be in [0, 1]");
  const real keep = 1 - rate;
  DropMasks m;
  m.m_r = bernoulli_mask(p.w_r.value.shape(), keep, rng);
  m.m_z = bernoulli_mask(p.w_z.value.shape(), keep, rng);
  m.m = bernoulli_mask(p.w.value.shape(), keep, rng);
  return m;
}

LocNetMasks locnet_masks(const LocNet& net, real rate, Rng& rng) {
  if (net.mdgru.size() != 3) throw_state("locnet_masks: net has no layers");
  LocNetMasks masks;
  for (size_t c = 0; c < 3; ++c) {
    // All directions of a layer share kernel shapes and this one mask set.
    masks.comp[c] = dropconnect_sample(net.mdgru[c].directions.front().params, rate, rng);
  }
  return masks;
}

CGruParams inference_weights(const CGruParams& p, real rate) {
  if (rate < 0 || rate > 1) throw_config("inference_weights: rate must be in [0, 1]");
  const real keep = 1 - rate;
  CGruParams out = p;
  for (Parameter* w : {&out.w_r, &out.w_z, &out.w}) {
    for (int64_t i = 0; i < w->value.size(); ++i) w->value[i] *= keep;
  }
  return out;
}

}  // namespace mdgru
