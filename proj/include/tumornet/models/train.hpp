#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/models/config.hpp"
#include "tumornet/models/data.hpp"
#include "tumornet/models/model.hpp"
#include "tumornet/nn/optim.hpp"

namespace tumornet::models {

enum class LossKind { mse, masked_mse };
std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  ModelConfig model;
  nn::OptimizerConfig optimizer;
  nn::ScheduleSpec schedule;  // total_steps <= 0: the length of the run
  LossKind loss = LossKind::mse;
  float mask_threshold = 0.001f;
  int mask_radius = 2;
  int epochs = 30;
  int batch_size = 4;
  std::int64_t max_steps = 0;    // 0: no cap beyond epochs
  std::size_t train_limit = 0;   // use the first N training samples; 0: all
  bool augment = true;
  bool validate = true;
  std::uint64_t seed = 0;

  void check() const;
  // Steps the run will take for `n_train` samples.
  std::int64_t planned_steps(std::size_t n_train) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Training pipelines per architecture:
//   tumorsurrogate  Adam (wd 4e-20), cosine 1e-6..1e-4 (desk: ..1e-2), clip 1, mse, augmented
//   ts baseline     Adam, same schedule, no clip, masked_mse, no augmentation
//   unet_reg        SGD Nesterov 0.99 (wd 3e-5), poly from 1e-2, clip 12
//   vit3d           AdamW (wd 1e-2), one-cycle 2e-4..8e-4
TrainConfig preset_training(Arch arch, Preset p, bool baseline = false);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;  // rate used by the last step of the epoch
  double train_mse = 0.0;  // mean main-output mse over the epoch's batches
  double val_mse = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::int64_t steps = 0;
  int best_epoch = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::filesystem::path best_checkpoint, last_checkpoint, log_csv;
};

using TrainProgress = std::function<void(const EpochLog&)>;

// Trains on the manifest's train split (validation on its val split) and
// writes train_log.csv, best.ckpt and last.ckpt into out_dir. A non-finite
// loss or gradient aborts with ErrorCode::numerical_blowup naming the step.
TrainResult train(const TrainConfig& cfg, const dataset::Manifest& manifest, const std::filesystem::path& out_dir,
                  const TrainProgress& progress = {});

// Same loop on in-memory splits; `val` may be empty.
TrainResult train(const TrainConfig& cfg, const MemorySplit& train_set, const MemorySplit& val,
                  const std::filesystem::path& out_dir, const TrainProgress& progress = {});

// Eval-mode predictions for a list of samples, in order: (N, 1, n, n, n).
nn::TensorF predict(ConditionedModel<float>& model, const std::vector<const MemorySample*>& samples, int batch_size = 4);

// Mean over samples of the per-sample mse, eval mode.
double split_mse(ConditionedModel<float>& model, const MemorySplit& split, int batch_size = 4);

// Rebuilds a model from a checkpoint written by train().
std::unique_ptr<ConditionedModel<float>> load_model(const std::filesystem::path& checkpoint);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace tumornet::models
