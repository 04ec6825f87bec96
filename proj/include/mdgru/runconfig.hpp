// Declarative run configuration: named profiles, JSON overlay with unknown-key
// rejection, and the effective-config echo written next to every output.
#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mdgru/pipeline.hpp"
#include "mdgru/synthetic.hpp"

namespace mdgru {

struct TrainSettings {
  int epochs = 50;
  uint64_t seed = 1;
  real rho = real(0.95);
  real eps = real(1e-8);
  real lambda = real(0.001);
  int64_t coarse_offset_range = 100;
  int max_sample_retries = 20;
  int checkpoint_every_epochs = 10;
  bool dropconnect = true;
};

struct SynthSettings {
  SynthSpec spec;
  SplitCounts counts{50, 10, 10};
};

struct RunConfig {
  std::string profile = "desk";
  PipelineConfig pipeline;
  NetProfile net;
  TrainSettings train;
  SynthSettings synth;

  // "desk": 64^3 volumes, coarse factor 2, 32^3 windows, reduced channels.
  // "full": 256^3 padded, factor 4, 64^3 windows, full channels.
  static RunConfig from_profile(const std::string& name);

  // Overlays a JSON document; unknown keys are configuration errors.
  void apply_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Serialization used by checkpoints and the effective-config echo.
nlohmann::json pipeline_to_json(const PipelineConfig& p);
PipelineConfig pipeline_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const NetProfile& p);
NetProfile profile_from_json(const nlohmann::json& j);

}  // namespace mdgru
