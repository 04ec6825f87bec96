#include "mdgru/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdgru/dropconnect.hpp"
#include "mdgru/optim.hpp"
#include "mdgru/rvol.hpp"
#include "mdgru/sampler.hpp"

namespace mdgru {

namespace {

struct CachedExample {
  Tensor input;                 // padded (coarse) or preprocessed (fine)
  std::array<double, 3> truth;  // in input's frame
};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainResult train_stage(const DatasetManifest& manifest, const RunConfig& cfg,
                        const TrainOptions& opt) {
  cfg.pipeline.validate();
  if (opt.stage == Stage::fine && opt.superres_n < 1) {
    throw_config("superres_n must be >= 1, got " + std::to_string(opt.superres_n));
  }
  if (opt.out_dir.empty()) throw_config("train_stage: out_dir is required");
  std::filesystem::create_directories(opt.out_dir);

  const auto train_set = manifest.split("train");
  const auto val_set = manifest.split("validation");
  if (train_set.empty() && cfg.train.epochs > 0) {
    throw_config("manifest has no train subjects but epochs > 0");
  }

  auto cache = [&](const ManifestEntry& e) {
    const Volume v = read_volume(e.volume_path);
    const Landmark t = read_landmark(e.landmark_path);
    Tensor pre = preprocess(v, cfg.pipeline.sigma_hp);
    CachedExample ce;
    if (opt.stage == Stage::coarse) {
      PadResult pr = pad_center(pre, cfg.pipeline.padded_extents);
      ce.input = std::move(pr.padded);
      for (size_t a = 0; a < 3; ++a) {
        ce.truth[a] = t.pos[a] + static_cast<double>(pr.origin_offset[a]);
      }
    } else {
      ce.input = std::move(pre);
      ce.truth = t.pos;
    }
    return ce;
  };
  std::vector<CachedExample> train_ex, val_ex;
  train_ex.reserve(train_set.size());
  val_ex.reserve(val_set.size());
  for (const auto& e : train_set) train_ex.push_back(cache(e));
  for (const auto& e : val_set) val_ex.push_back(cache(e));

  const Rng root(cfg.train.seed);
  Rng init_rng = root.stream("init");

  CoarseModel coarse_model;
  FineModel fine_model;
  std::vector<Parameter*> params;
  nlohmann::json ck_config;
  if (opt.stage == Stage::coarse) {
    coarse_model = CoarseModel::make(cfg.pipeline, cfg.net);
    init_coarse_model(coarse_model, init_rng);
    params = coarse_model.all_params();
    ck_config = coarse_config_json(cfg.pipeline, cfg.net);
  } else {
    fine_model = FineModel::make(cfg.pipeline, cfg.net, opt.superres_n);
    init_fine_model(fine_model, init_rng);
    params = fine_model.all_params();
    ck_config = fine_config_json(cfg.pipeline, cfg.net, opt.superres_n);
  }
  AdaDeltaState st = AdaDeltaState::make(params, cfg.train.rho, cfg.train.eps, cfg.train.lambda);

  LocNet& net = opt.stage == Stage::coarse ? coarse_model.net : fine_model.net;
  const real rate = cfg.net.dropconnect_rate;
  const bool use_masks = cfg.train.dropconnect && rate > 0;

  // Builds the training loss for one sampled example. Masks may be null.
  auto train_loss_var = [&](Tape& tp, const Tensor& input, const std::array<int64_t, 3>& target,
                            const LocNetMasks* masks) {
    Var x = tp.constant(input);
    DistVars d;
    if (opt.stage == Stage::coarse) {
      Var sub = ops::conv(tp, x, tp.parameter(coarse_model.in_w),
                          tp.parameter(coarse_model.in_b), coarse_model.input_spec);
      d = locnet_forward(tp, sub, net, /*training=*/true, masks);
    } else {
      d = locnet_forward(tp, x, net, /*training=*/true, masks);
    }
    return locnet_loss(tp, d, target);
  };

  const auto grid = cfg.pipeline.coarse_grid_extents();
  const auto window = cfg.pipeline.window_extents;
  const int64_t n = opt.superres_n;

  // Deterministic validation: centered examples, inference-scaled weights.
  auto validation_loss = [&]() -> double {
    if (val_ex.empty()) return 0;
    double total = 0;
    for (const CachedExample& ce : val_ex) {
      Tape tp(false);
      std::array<int64_t, 3> target{};
      Var loss;
      if (opt.stage == Stage::coarse) {
        for (size_t a = 0; a < 3; ++a) {
          target[a] = coarse_class_of(ce.truth[a], cfg.pipeline.coarse_factor, grid[a]);
        }
        Var x = tp.constant(ce.input);
        Var sub = ops::conv(tp, x, tp.parameter(coarse_model.in_w),
                            tp.parameter(coarse_model.in_b), coarse_model.input_spec);
        DistVars d = locnet_forward(tp, sub, net, /*training=*/false);
        loss = locnet_loss(tp, d, target);
      } else {
        Landmark c;
        c.space = Space::original;
        c.pos = ce.truth;
        WindowResult win = extract_window(ce.input, c, window);
        for (size_t a = 0; a < 3; ++a) {
          target[a] = fine_class_of(ce.truth[a] - static_cast<double>(win.origin[a]), n,
                                    window[a] * n);
        }
        Var x = tp.constant(win.window);
        DistVars d = locnet_forward(tp, x, net, /*training=*/false);
        loss = locnet_loss(tp, d, target);
      }
      total += static_cast<double>(tp.val(loss).data()[0]);
    }
    return total / static_cast<double>(val_ex.size());
  };

  TrainResult result;
  result.loss_csv_path = opt.out_dir + "/" + opt.run_name + "_loss.csv";
  result.checkpoint_path = opt.out_dir + "/" + opt.run_name + ".mgck";

  std::ofstream csv(result.loss_csv_path, std::ios::trunc);
  if (!csv) throw_error(ErrorKind::Runtime, "cannot open for writing: " + result.loss_csv_path);
  csv << "iteration,train_loss,val_loss\n";

  SamplerConfig scfg;
  scfg.coarse_offset_range = cfg.train.coarse_offset_range;
  scfg.max_retries = cfg.train.max_sample_retries;

  int iter = 0;
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    for (size_t i = 0; i < train_ex.size(); ++i) {
      ++iter;
      Rng sample_rng = root.stream("sample", static_cast<uint64_t>(iter));
      const CachedExample& ce = train_ex[i];

      Tensor input;
      std::array<int64_t, 3> target{};
      if (opt.stage == Stage::coarse) {
        CoarseExample ex = sample_coarse_example(ce.input, ce.truth, cfg.pipeline, scfg, sample_rng);
        input = std::move(ex.input);
        target = ex.target;
      } else {
        FineExample ex = sample_fine_example(ce.input, ce.truth, window, n, sample_rng);
        input = std::move(ex.input);
        target = ex.target;
      }

      LocNetMasks masks;
      if (use_masks) {
        Rng mask_rng = root.stream("masks", static_cast<uint64_t>(iter));
        masks = locnet_masks(net, rate, mask_rng);
      }

      for (Parameter* p : params) p->zero_grad();
      Tape tp(true);
      Var loss = train_loss_var(tp, input, target, use_masks ? &masks : nullptr);
      const double loss_val = static_cast<double>(tp.val(loss).data()[0]);
      if (!std::isfinite(loss_val)) {
        throw_error(ErrorKind::Runtime, "training aborted: non-finite loss at iteration " +
                                            std::to_string(iter));
      }
      tp.backward(loss);
      adadelta_step(params, st);

      result.last_train_loss = loss_val;
      result.iterations = iter;

      const bool epoch_end = i + 1 == train_ex.size();
      csv << iter << ',' << g17(loss_val) << ',';
      if (epoch_end) {
        result.last_val_loss = validation_loss();
        csv << g17(result.last_val_loss);
      }
      csv << "\n";
    }
    if (opt.on_epoch) opt.on_epoch(epoch, result.last_train_loss, result.last_val_loss);
    if (cfg.train.checkpoint_every_epochs > 0 && epoch % cfg.train.checkpoint_every_epochs == 0 &&
        epoch != cfg.train.epochs) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_epoch%04d.mgck", epoch);
      write_checkpoint(opt.out_dir + "/" + opt.run_name + suffix, ck_config, params);
    }
  }

  csv.flush();
  if (!csv) throw_error(ErrorKind::Runtime, "write failed: " + result.loss_csv_path);
  write_checkpoint(result.checkpoint_path, ck_config, params);
  return result;
}

}  // namespace mdgru
