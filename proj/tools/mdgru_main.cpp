// Command line front end: synthetic data generation, stage training,
// single-volume localization, multi-variant evaluation, and gradient checks.
#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mdgru/gradcheck.hpp"
#include "mdgru/metrics.hpp"
#include "mdgru/rvol.hpp"
#include "mdgru/trainer.hpp"

namespace {

using namespace mdgru;

struct CommonFlags {
  std::string profile = "desk";
  std::string config_path;
  int64_t seed = -1;  // negative = keep the config value
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--profile", f.profile, "Configuration profile (desk|full)")
      ->capture_default_str();
  cmd->add_option("--config", f.config_path, "JSON overlay for the profile config");
  cmd->add_option("--seed", f.seed, "Override the run seed (>= 0)");
}

RunConfig load_config(const CommonFlags& f) {
  RunConfig cfg = RunConfig::from_profile(f.profile);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw_config("cannot open config file: " + f.config_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw_parse(f.config_path + ": invalid JSON");
    cfg.apply_json(j);
  }
  if (f.seed >= 0) {
    cfg.train.seed = static_cast<uint64_t>(f.seed);
    cfg.synth.spec.seed = static_cast<uint64_t>(f.seed);
  }
  cfg.pipeline.validate();
  cfg.synth.spec.validate();
  return cfg;
}

void write_effective_config(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir + "/effective_config.json");
  if (!f) throw_error(ErrorKind::Runtime, "cannot write " + out_dir + "/effective_config.json");
  f << cfg.to_json().dump(2) << "\n";
}

std::string triple(const std::array<double, 3>& v) {
  char buf[100];
  std::snprintf(buf, sizeof buf, "%.6g %.6g %.6g", v[0], v[1], v[2]);
  return buf;
}

int cmd_synth(const CommonFlags& common, const std::string& out_dir) {
  RunConfig cfg = load_config(common);
  write_effective_config(cfg, out_dir);
  DatasetManifest m = generate_synthetic(cfg.synth.spec, cfg.synth.counts, out_dir);
  std::cout << "subjects=" << m.entries.size() << "\n"
            << "manifest=" << out_dir << "/manifest.tsv\n";
  return 0;
}

int cmd_train(const CommonFlags& common, const std::string& manifest_path,
              const std::string& stage_name, int64_t superres_n, int epochs,
              const std::string& out_dir, std::string run_name) {
  RunConfig cfg = load_config(common);
  if (epochs >= 0) cfg.train.epochs = epochs;

  TrainOptions opt;
  opt.stage = stage_name == "coarse" ? Stage::coarse : Stage::fine;
  opt.superres_n = superres_n > 0 ? superres_n : cfg.pipeline.superres_n;
  opt.out_dir = out_dir;
  if (run_name.empty()) {
    run_name = opt.stage == Stage::coarse ? "coarse"
                                          : "fine_n" + std::to_string(opt.superres_n);
  }
  opt.run_name = run_name;
  opt.on_epoch = [](int epoch, double train_loss, double val_loss) {
    std::printf("epoch=%d train_loss=%.6f val_loss=%.6f\n", epoch, train_loss, val_loss);
    std::fflush(stdout);
  };

  DatasetManifest manifest = DatasetManifest::read(manifest_path);
  write_effective_config(cfg, out_dir);
  TrainResult r = train_stage(manifest, cfg, opt);
  std::cout << "iterations=" << r.iterations << "\n"
            << "loss_csv=" << r.loss_csv_path << "\n"
            << "checkpoint=" << r.checkpoint_path << "\n";
  return 0;
}

bool resolve_parabola(const std::string& flag, bool config_default) {
  if (flag.empty()) return config_default;
  return flag == "on";
}

void check_window_match(const PipelineConfig& a, const PipelineConfig& b, const char* what) {
  if (a.window_extents != b.window_extents) {
    throw_config(std::string(what) + ": window extents disagree with the coarse checkpoint");
  }
}

// Missing checkpoints are usage errors, not runtime failures.
void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw_config(std::string(what) + " not found: " + path);
  }
}

nlohmann::json dist_json(const CoordinateDistribution& d) {
  nlohmann::json out;
  const char* names[3] = {"axis0", "axis1", "axis2"};
  for (size_t a = 0; a < 3; ++a) {
    std::vector<double> v(static_cast<size_t>(d.axis[a].size()));
    for (int64_t i = 0; i < d.axis[a].size(); ++i) {
      v[static_cast<size_t>(i)] = static_cast<double>(d.axis[a][i]);
    }
    out[names[a]] = v;
  }
  return out;
}

int cmd_localize(const std::string& volume_path, const std::string& coarse_path,
                 const std::string& fine_path, int64_t superres_n,
                 const std::string& parabola_flag, const std::string& out_dir) {
  require_file(coarse_path, "coarse checkpoint");
  require_file(fine_path, "fine checkpoint");
  LoadedCoarse lc = load_coarse_model(coarse_path);
  LoadedFine lf = load_fine_model(fine_path);
  check_window_match(lc.pipeline, lf.pipeline, "fine checkpoint");
  if (superres_n > 0 && superres_n != lf.model.n) {
    throw_config("--superres-n " + std::to_string(superres_n) +
                 " does not match the fine checkpoint (n = " + std::to_string(lf.model.n) + ")");
  }
  const bool parab = resolve_parabola(parabola_flag, lc.pipeline.parabola);

  const Volume v = read_volume(volume_path);
  LocalizeResult r = localize(v, lc.model, lf.model, lc.pipeline, parab);
  for (const std::string& w : r.warnings) std::cout << "warning=" << w << "\n";
  std::cout << "coarse_voxel=" << triple(r.coarse_voxel.pos) << "\n"
            << "window_origin=" << r.window_origin[0] << " " << r.window_origin[1] << " "
            << r.window_origin[2] << "\n"
            << "voxel=" << triple(r.voxel.pos) << "\n"
            << "mm=" << triple(r.mm) << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_landmark(r.voxel, out_dir + "/landmark.txt");
    nlohmann::json dists{{"coarse", dist_json(r.coarse_dist)}, {"fine", dist_json(r.fine_dist)}};
    std::ofstream f(out_dir + "/distributions.json");
    f << dists.dump(2) << "\n";
    std::cout << "landmark=" << out_dir << "/landmark.txt\n"
              << "distributions=" << out_dir << "/distributions.json\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& coarse_path,
                 const std::string& fine_n1_path, const std::string& fine_n4_path,
                 const std::string& split, const std::string& out_dir) {
  require_file(coarse_path, "coarse checkpoint");
  require_file(fine_n1_path, "fine n1 checkpoint");
  require_file(fine_n4_path, "fine n4 checkpoint");
  LoadedCoarse lc = load_coarse_model(coarse_path);
  LoadedFine f1 = load_fine_model(fine_n1_path);
  LoadedFine f4 = load_fine_model(fine_n4_path);
  check_window_match(lc.pipeline, f1.pipeline, "fine n1 checkpoint");
  check_window_match(lc.pipeline, f4.pipeline, "fine n4 checkpoint");

  DatasetManifest manifest = DatasetManifest::read(manifest_path);
  std::vector<ManifestEntry> cases = manifest.split(split);
  if (cases.empty()) throw_config("manifest has no subjects in split '" + split + "'");

  EvalReport rep = evaluate_variants(cases, lc.model, f1.model, f4.model, lc.pipeline);
  std::filesystem::create_directories(out_dir);
  const std::string csv = out_dir + "/errors.csv";
  write_error_csv(csv, rep.rows);
  const std::string table = format_report(rep);
  {
    std::ofstream f(out_dir + "/report.txt");
    f << table;
  }
  std::cout << table << "cases=" << cases.size() << "\n"
            << "csv=" << csv << "\n";
  return 0;
}

int cmd_gradcheck(bool inject, int64_t max_elements) {
  GradCheckReport rep = run_gradcheck(inject, max_elements);
  for (const GradCheckCase& c : rep.cases) {
    std::printf("case=%s max_rel_err=%.3e elements=%lld\n", c.name.c_str(), c.max_rel_err,
                static_cast<long long>(c.elements));
  }
  std::printf("gradcheck=%s tolerance=%.0e\n", rep.passed ? "PASS" : "FAIL", rep.tolerance);
  return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* th = std::getenv("MDGRU_THREADS"); th && *th) {
    const int n = std::atoi(th);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Two-stage recurrent landmark localization in 3-D volumes"};
  app.require_subcommand(1);

  CommonFlags synth_common;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, synth_common);
  synth->add_option("--out", synth_out, "Output directory")->required();

  CommonFlags train_common;
  std::string train_manifest, train_stage_name, train_out, train_run_name;
  int64_t train_n = 0;
  int train_epochs = -1;
  CLI::App* train = app.add_subcommand("train", "Train one stage");
  add_common(train, train_common);
  train->add_option("--manifest", train_manifest, "Dataset manifest")->required();
  train->add_option("--stage", train_stage_name, "Which stage to train")
      ->required()
      ->check(CLI::IsMember({"coarse", "fine"}));
  train->add_option("--superres-n", train_n, "Fine-stage class density (classes per voxel)");
  train->add_option("--epochs", train_epochs, "Override the configured epoch count");
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--run-name", train_run_name, "File stem for CSV and checkpoints");

  std::string loc_volume, loc_coarse, loc_fine, loc_parabola, loc_out;
  int64_t loc_n = 0;
  CLI::App* loc = app.add_subcommand("localize", "Locate the landmark in one volume");
  loc->add_option("--volume", loc_volume, "Input volume (.rvol)")->required();
  loc->add_option("--coarse", loc_coarse, "Coarse checkpoint")->required();
  loc->add_option("--fine", loc_fine, "Fine checkpoint")->required();
  loc->add_option("--superres-n", loc_n, "Require this class density of the fine checkpoint");
  loc->add_option("--parabola", loc_parabola, "Parabolic refinement (on|off)")
      ->check(CLI::IsMember({"on", "off"}));
  loc->add_option("--out", loc_out, "Directory for landmark.txt and distributions.json");

  std::string ev_manifest, ev_coarse, ev_n1, ev_n4, ev_split = "test", ev_out;
  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate all variants on a split");
  ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  ev->add_option("--coarse", ev_coarse, "Coarse checkpoint")->required();
  ev->add_option("--fine-n1", ev_n1, "Fine checkpoint with n = 1")->required();
  ev->add_option("--fine-n4", ev_n4, "Fine checkpoint with n = 4")->required();
  ev->add_option("--split", ev_split, "Manifest split to evaluate")->capture_default_str();
  ev->add_option("--out", ev_out, "Output directory")->required();

  bool gc_inject = false;
  int64_t gc_max_elements = 0;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc->add_flag("--inject-fault", gc_inject, "Corrupt one gradient to prove checks can fail");
  gc->add_option("--max-elements", gc_max_elements,
                 "Probed elements per parameter tensor (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_common, synth_out);
    if (train->parsed()) {
      return cmd_train(train_common, train_manifest, train_stage_name, train_n, train_epochs,
                       train_out, train_run_name);
    }
    if (loc->parsed()) {
      return cmd_localize(loc_volume, loc_coarse, loc_fine, loc_n, loc_parabola, loc_out);
    }
    if (ev->parsed()) return cmd_evaluate(ev_manifest, ev_coarse, ev_n1, ev_n4, ev_split, ev_out);
    if (gc->parsed()) return cmd_gradcheck(gc_inject, gc_max_elements);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Parse) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
