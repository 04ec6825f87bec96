// Single-example training loop for either stage: cached preprocessing,
// per-iteration sampling and DropConnect masks, AdaDelta updates, a loss CSV,
// and periodic checkpoints.
#pragma once

#include <functional>
#include <string>

#include "mdgru/checkpoint.hpp"
#include "mdgru/dataset.hpp"
#include "mdgru/runconfig.hpp"

namespace mdgru {

enum class Stage { coarse, fine };

struct TrainOptions {
  Stage stage = Stage::coarse;
  int64_t superres_n = 1;  // fine stage only
  std::string out_dir;
  std::string run_name = "coarse";  // file stem for the CSV and checkpoints
  // Called after each epoch's validation pass; may be empty.
  std::function<void(int epoch, double train_loss, double val_loss)> on_epoch;
};

struct TrainResult {
  std::string checkpoint_path;  // final weights, written even for 0 epochs
  std::string loss_csv_path;
  int iterations = 0;
  double last_train_loss = 0;
  double last_val_loss = 0;
};

// One pass per training subject per epoch, in manifest order. The loss CSV
// has header iteration,train_loss,val_loss; val_loss is filled only on the
// last iteration of each epoch (deterministic centered examples, scaled
// weights). A non-finite loss or gradient aborts; checkpoints already on
// disk are kept.
TrainResult train_stage(const DatasetManifest& manifest, const RunConfig& cfg,
                        const TrainOptions& opt);

}  // namespace mdgru
