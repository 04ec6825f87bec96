#include "mdgru/runconfig.hpp"

namespace mdgru {

using nlohmann::json;

namespace {

json arr3(const std::array<int64_t, 3>& a) { return json::array({a[0], a[1], a[2]}); }
json arr3(const std::array<double, 3>& a) { return json::array({a[0], a[1], a[2]}); }

std::array<int64_t, 3> i3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw_config("config: expected an array of 3 integers");
  return {j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
}

std::array<double, 3> d3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw_config("config: expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Overlays patch onto base, rejecting keys base does not already have.
void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) {
    throw_config("config: expected an object at " + (path.empty() ? "top level" : path));
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw_config("unknown config key: " + p);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), p);
    } else {
      slot = it.value();
    }
  }
}

json synth_to_json(const SynthSettings& s) {
  return json{{"extents", arr3(s.spec.extents)},
              {"spacing", arr3(s.spec.spacing)},
              {"margin", s.spec.margin},
              {"background_amp", s.spec.background_amp},
              {"background_cycles", s.spec.background_cycles},
              {"background_terms", s.spec.background_terms},
              {"notch_depth", s.spec.notch_depth},
              {"notch_width_narrow", s.spec.notch_width_narrow},
              {"notch_width_wide", s.spec.notch_width_wide},
              {"noise_level", s.spec.noise_level},
              {"seed", s.spec.seed},
              {"train_count", s.counts.train},
              {"validation_count", s.counts.validation},
              {"test_count", s.counts.test}};
}

SynthSettings synth_from_json(const json& j) {
  SynthSettings s;
  s.spec.extents = i3(j.at("extents"));
  s.spec.spacing = d3(j.at("spacing"));
  s.spec.margin = j.at("margin").get<int64_t>();
  s.spec.background_amp = j.at("background_amp").get<double>();
  s.spec.background_cycles = j.at("background_cycles").get<double>();
  s.spec.background_terms = j.at("background_terms").get<int>();
  s.spec.notch_depth = j.at("notch_depth").get<double>();
  s.spec.notch_width_narrow = j.at("notch_width_narrow").get<double>();
  s.spec.notch_width_wide = j.at("notch_width_wide").get<double>();
  s.spec.noise_level = j.at("noise_level").get<double>();
  s.spec.seed = j.at("seed").get<uint64_t>();
  s.counts.train = j.at("train_count").get<int64_t>();
  s.counts.validation = j.at("validation_count").get<int64_t>();
  s.counts.test = j.at("test_count").get<int64_t>();
  return s;
}

json train_to_json(const TrainSettings& t) {
  return json{{"epochs", t.epochs},
              {"seed", t.seed},
              {"rho", t.rho},
              {"eps", t.eps},
              {"lambda", t.lambda},
              {"coarse_offset_range", t.coarse_offset_range},
              {"max_sample_retries", t.max_sample_retries},
              {"checkpoint_every_epochs", t.checkpoint_every_epochs},
              {"dropconnect", t.dropconnect}};
}

TrainSettings train_from_json(const json& j) {
  TrainSettings t;
  t.epochs = j.at("epochs").get<int>();
  t.seed = j.at("seed").get<uint64_t>();
  t.rho = static_cast<real>(j.at("rho").get<double>());
  t.eps = static_cast<real>(j.at("eps").get<double>());
  t.lambda = static_cast<real>(j.at("lambda").get<double>());
  t.coarse_offset_range = j.at("coarse_offset_range").get<int64_t>();
  t.max_sample_retries = j.at("max_sample_retries").get<int>();
  t.checkpoint_every_epochs = j.at("checkpoint_every_epochs").get<int>();
  t.dropconnect = j.at("dropconnect").get<bool>();
  return t;
}

}  // namespace

json pipeline_to_json(const PipelineConfig& p) {
  return json{{"window_extents", arr3(p.window_extents)},
              {"coarse_factor", p.coarse_factor},
              {"padded_extents", arr3(p.padded_extents)},
              {"input_conv_channels", p.input_conv_channels},
              {"superres_n", p.superres_n},
              {"parabola", p.parabola},
              {"sigma_hp", p.sigma_hp}};
}

PipelineConfig pipeline_from_json(const json& j) {
  PipelineConfig p;
  p.window_extents = i3(j.at("window_extents"));
  p.coarse_factor = j.at("coarse_factor").get<int64_t>();
  p.padded_extents = i3(j.at("padded_extents"));
  p.input_conv_channels = j.at("input_conv_channels").get<int64_t>();
  p.superres_n = j.at("superres_n").get<int64_t>();
  p.parabola = j.at("parabola").get<bool>();
  p.sigma_hp = j.at("sigma_hp").get<double>();
  return p;
}

json profile_to_json(const NetProfile& p) {
  return json{{"mdgru_channels", arr3(p.mdgru_channels)},
              {"pointwise_channels", arr3(p.pointwise_channels)},
              {"cgru_kernel", p.cgru_kernel},
              {"dropconnect_rate", p.dropconnect_rate}};
}

NetProfile profile_from_json(const json& j) {
  NetProfile p;
  p.mdgru_channels = i3(j.at("mdgru_channels"));
  p.pointwise_channels = i3(j.at("pointwise_channels"));
  p.cgru_kernel = j.at("cgru_kernel").get<int64_t>();
  p.dropconnect_rate = static_cast<real>(j.at("dropconnect_rate").get<double>());
  return p;
}

RunConfig RunConfig::from_profile(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "full") {
    // Defaults in the struct definitions already describe this shape.
    c.train.epochs = 50;
    c.synth.spec.extents = {256, 256, 256};
    c.synth.spec.margin = 32;
    return c;
  }
  if (name != "desk") throw_config("unknown profile: " + name + " (expected desk|full)");
  c.pipeline.window_extents = {32, 32, 32};
  c.pipeline.coarse_factor = 2;
  c.pipeline.padded_extents = {64, 64, 64};
  c.pipeline.input_conv_channels = 8;
  c.net.mdgru_channels = {8, 16, 32};
  c.net.pointwise_channels = {12, 24, 48};
  c.train.epochs = 40;
  c.train.lambda = real(1.0);
  c.train.coarse_offset_range = 25;
  c.synth.spec.extents = {64, 64, 64};
  c.synth.spec.margin = 16;
  return c;
}

void RunConfig::apply_json(const json& j) {
  json base = to_json();
  merge_checked(base, j, "");
  try {
    profile = base.at("profile").get<std::string>();
    pipeline = pipeline_from_json(base.at("pipeline"));
    net = profile_from_json(base.at("net"));
    train = train_from_json(base.at("train"));
    synth = synth_from_json(base.at("synth"));
  } catch (const json::exception& e) {
    throw_config(std::string("config: ") + e.what());
  }
}

json RunConfig::to_json() const {
  return json{{"profile", profile},
              {"pipeline", pipeline_to_json(pipeline)},
              {"net", profile_to_json(net)},
              {"train", train_to_json(train)},
              {"synth", synth_to_json(synth)}};
}

}  // namespace mdgru
