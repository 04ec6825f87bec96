// Binary model container: a JSON config blob plus named f64 tensors, enough
// to rebuild a stage model without external context.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdgru/pipeline.hpp"
#include "mdgru/tape.hpp"

namespace mdgru {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;
  std::vector<std::string> order;  // tensor names in file order
  std::map<std::string, Tensor> tensors;
};

void write_checkpoint(const std::string& path, const nlohmann::json& config,
                      const std::vector<Parameter*>& params);
Checkpoint read_checkpoint(const std::string& path);

// Copies tensors into the matching parameters by name. Missing names and
// shape mismatches are Format errors; extra tensors in the file are too.
void load_into(const Checkpoint& ck, const std::vector<Parameter*>& params);

nlohmann::json coarse_config_json(const PipelineConfig& pcfg, const NetProfile& profile);
nlohmann::json fine_config_json(const PipelineConfig& pcfg, const NetProfile& profile, int64_t n);

struct LoadedCoarse {
  PipelineConfig pipeline;
  NetProfile profile;
  CoarseModel model;
};

struct LoadedFine {
  PipelineConfig pipeline;
  NetProfile profile;
  FineModel model;
};

// Rebuild a model from the embedded config and fill in its weights.
LoadedCoarse load_coarse_model(const std::string& path);
LoadedFine load_fine_model(const std::string& path);

}  // namespace mdgru
