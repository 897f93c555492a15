#include "tumornet/models/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tumornet/core/json.hpp"
#include "tumornet/nn/checkpoint.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::models {

namespace fs = std::filesystem;

std::string to_string(LossKind k) {
  return k == LossKind::mse ? "mse" : "masked_mse";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "masked_mse") return LossKind::masked_mse;
  throw Error(ErrorCode::config, "unknown loss '" + s + "' (mse, masked_mse)");
}

void TrainConfig::check() const {
  model.validate();
  optimizer.validate();
  if (epochs < 1) throw Error(ErrorCode::config, "training.epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::config, "training.batch_size must be >= 1");
  if (max_steps < 0) throw Error(ErrorCode::config, "training.max_steps must be >= 0");
  if (mask_radius < 0) throw Error(ErrorCode::config, "training.mask_radius must be >= 0");
}

std::int64_t TrainConfig::planned_steps(std::size_t n_train) const {
  const auto per_epoch = static_cast<std::int64_t>((n_train + batch_size - 1) / batch_size);
  const std::int64_t total = per_epoch * epochs;
  return max_steps > 0 ? std::min(total, max_steps) : total;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"optimizer", c.optimizer},
                     {"schedule", c.schedule},
                     {"loss", to_string(c.loss)},
                     {"mask_threshold", c.mask_threshold},
                     {"mask_radius", c.mask_radius},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"train_limit", c.train_limit},
                     {"augment", c.augment},
                     {"validate", c.validate},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const std::string w = "training";
  reject_unknown(j, {"model", "optimizer", "schedule", "loss", "mask_threshold", "mask_radius", "epochs", "batch_size",
                     "max_steps", "train_limit", "augment", "validate", "seed"},
                 w);
  read_optional(j, "model", c.model, w);
  read_optional(j, "optimizer", c.optimizer, w);
  read_optional(j, "schedule", c.schedule, w);
  if (j.contains("loss")) c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  read_optional(j, "mask_threshold", c.mask_threshold, w);
  read_optional(j, "mask_radius", c.mask_radius, w);
  read_optional(j, "epochs", c.epochs, w);
  read_optional(j, "batch_size", c.batch_size, w);
  read_optional(j, "max_steps", c.max_steps, w);
  read_optional(j, "train_limit", c.train_limit, w);
  read_optional(j, "augment", c.augment, w);
  read_optional(j, "validate", c.validate, w);
  read_optional(j, "seed", c.seed, w);
  c.check();
}

TrainConfig preset_training(Arch arch, Preset p, bool baseline) {
  TrainConfig c;
  c.model = baseline ? ts_baseline(p) : preset_model(arch, p);
  c.schedule.total_steps = 0;
  c.epochs = p == Preset::paper ? 100 : 40;
  c.batch_size = p == Preset::paper ? 2 : 4;
  using OK = nn::OptimizerConfig::Kind;
  using SK = nn::ScheduleSpec::Kind;
  switch (baseline ? Arch::tumorsurrogate : arch) {
    case Arch::tumorsurrogate:
      c.optimizer.kind = OK::adam;
      c.optimizer.weight_decay = 4e-20;
      c.schedule.kind = SK::cosine_annealing;
      c.schedule.eta_min = 1e-6;
      // At 1e-4 the desk run (a few thousand steps) is still far from converged.
      c.schedule.eta_max = p == Preset::paper ? 1e-4 : 1e-2;
      c.optimizer.grad_clip_norm = 1.0;
      break;
    case Arch::unet_reg:
      c.optimizer.kind = OK::sgd_nesterov;
      c.optimizer.momentum = 0.99;
      c.optimizer.weight_decay = 3e-5;
      c.optimizer.grad_clip_norm = 12.0;
      c.schedule.kind = SK::poly_decay;
      c.schedule.eta_max = 1e-2;
      c.schedule.eta_min = 0.0;
      break;
    case Arch::vit3d:
      c.optimizer.kind = OK::adamw;
      c.optimizer.weight_decay = 1e-2;
      c.optimizer.grad_clip_norm.reset();
      c.schedule.kind = SK::one_cycle;
      c.schedule.eta_min = 2e-4;
      c.schedule.eta_max = 8e-4;
      break;
  }
  c.optimizer.lr = c.schedule.eta_max;
  if (baseline) {
    c.optimizer.grad_clip_norm.reset();
    c.loss = LossKind::masked_mse;
    c.augment = false;
  }
  return c;
}

namespace {

std::vector<nn::TensorF> param_list(nn::Module<float>& m) {
  std::vector<nn::TensorF> out;
  for (auto& [name, p] : m.parameters()) out.push_back(p);
  return out;
}

// Fisher-Yates with our own index draws, so the order does not depend on the
// standard library's shuffle.
std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  return idx;
}

nn::TensorF training_loss(const TrainConfig& cfg, const ModelOutput<float>& out, const nn::TensorF& target) {
  if (cfg.loss == LossKind::masked_mse) {
    return nn::masked_mse(out.main, target, region_mask(target, cfg.mask_threshold, cfg.mask_radius));
  }
  if (out.aux.empty()) return nn::mse_loss(out.main, target);
  const auto& w = cfg.model.unet.ds_weights;
  auto loss = nn::mul_scalar(nn::mse_loss(out.main, target), static_cast<float>(w[0]));
  nn::TensorF t = target;
  for (std::size_t h = 0; h < out.aux.size(); ++h) {
    // 2x2x2 averaging is trilinear downsampling by 2 with half-voxel alignment.
    t = nn::avg_pool2x(t);
    loss = nn::add(loss, nn::mul_scalar(nn::mse_loss(out.aux[h], t), static_cast<float>(w[h + 1])));
  }
  return loss;
}

nlohmann::json checkpoint_extra(const TrainConfig& cfg, const EpochLog& row) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"training", cfg}, {"epoch", row.epoch}, {"train_mse", num(row.train_mse)}, {"val_mse", num(row.val_mse)}};
}

}  // namespace

nn::TensorF predict(ConditionedModel<float>& model, const std::vector<const MemorySample*>& samples, int batch_size) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "predict: no samples");
  model.eval();
  const int n = samples.front()->n;
  const std::int64_t nv = static_cast<std::int64_t>(n) * n * n;
  nn::TensorF out(nn::Shape{static_cast<int>(samples.size()), 1, n, n, n});
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const std::size_t e = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    const auto b = make_batch({samples.begin() + i, samples.begin() + e});
    const auto pred = model.forward(b.tissue, b.theta);
    std::copy(pred.data(), pred.data() + pred.numel(), out.data() + static_cast<std::int64_t>(i) * nv);
  }
  return out;
}

double split_mse(ConditionedModel<float>& model, const MemorySplit& split, int batch_size) {
  std::vector<const MemorySample*> ptrs;
  for (const auto& s : split.samples) ptrs.push_back(&s);
  const auto pred = predict(model, ptrs, batch_size);
  const std::int64_t nv = pred.numel() / static_cast<std::int64_t>(ptrs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    double se = 0.0;
    for (std::int64_t k = 0; k < nv; ++k) {
      const double d = static_cast<double>(pred.data()[i * nv + k]) - ptrs[i]->target[k];
      se += d * d;
    }
    total += se / static_cast<double>(nv);
  }
  return total / static_cast<double>(ptrs.size());
}

void write_train_log(const fs::path& path, const std::vector<EpochLog>& log) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
  f << "epoch,lr,train_mse,val_mse\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,", r.epoch, r.lr, r.train_mse);
    f << buf;
    if (std::isfinite(r.val_mse)) {
      std::snprintf(buf, sizeof buf, "%.9g", r.val_mse);
      f << buf;
    } else {
      f << "nan";
    }
    f << '\n';
  }
}

TrainResult train(const TrainConfig& cfg_in, const MemorySplit& train_set, const MemorySplit& val, const fs::path& out_dir,
                  const TrainProgress& progress) {
  cfg_in.check();
  if (train_set.samples.empty()) throw Error(ErrorCode::missing_data, "training split is empty");
  const int n = train_set.samples.front().n;
  if (n != cfg_in.model.input()) {
    throw Error(ErrorCode::config, "model input " + std::to_string(cfg_in.model.input()) + " does not match sample size " +
                                       std::to_string(n));
  }
  TrainConfig cfg = cfg_in;
  const std::int64_t total = cfg.planned_steps(train_set.size());
  if (cfg.schedule.total_steps <= 0) cfg.schedule.total_steps = total;
  cfg.schedule.validate();

  fs::create_directories(out_dir);
  auto model = build_model<float>(cfg.model, derive_seed(cfg.seed, 0, 0));
  auto params = param_list(*model);
  nn::Optimizer<float> opt(params, cfg.optimizer);
  const nlohmann::json model_json = cfg.model;

  TrainResult res;
  res.best_checkpoint = out_dir / "best.ckpt";
  res.last_checkpoint = out_dir / "last.ckpt";
  res.log_csv = out_dir / "train_log.csv";
  const bool use_val = cfg.validate && !val.samples.empty();
  const auto symmetries = field::AxisTransform::all();

  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs && step < total; ++epoch) {
    model->train();
    const auto order = shuffled(train_set.size(), derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(epoch)));
    double mse_sum = 0.0;
    int batches = 0;
    EpochLog row;
    row.epoch = epoch;
    for (std::size_t i = 0; i < order.size() && step < total; i += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
      std::vector<MemorySample> augmented;
      std::vector<const MemorySample*> members;
      if (cfg.augment) {
        Rng rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(step)));
        augmented.reserve(e - i);
        for (std::size_t k = i; k < e; ++k) {
          const auto& t = symmetries[uniform_index(rng, symmetries.size())];
          augmented.push_back(transform_sample(train_set.samples[order[k]], t, train_set.ranges));
        }
        for (const auto& s : augmented) members.push_back(&s);
      } else {
        for (std::size_t k = i; k < e; ++k) members.push_back(&train_set.samples[order[k]]);
      }
      const auto batch = make_batch(members);

      const double lr = nn::schedule(cfg.schedule, step);
      double loss_value = 0.0, main_mse = 0.0;
      {
        nn::Tape<float> tape;
        nn::TapeScope<float> scope(tape);
        const auto out = model->forward_all(batch.tissue, batch.theta);
        const auto loss = training_loss(cfg, out, batch.target);
        loss_value = loss.item();
        main_mse = static_cast<double>((out.main.value() - batch.target.value()).square().mean());
        if (!std::isfinite(loss_value)) {
          throw Error(ErrorCode::numerical_blowup, "non-finite training loss at step " + std::to_string(step));
        }
        opt.zero_grad();
        tape.backward(loss);
      }
      const double gnorm = opt.step(lr);
      if (!std::isfinite(gnorm)) {
        throw Error(ErrorCode::numerical_blowup, "non-finite gradient norm at step " + std::to_string(step));
      }
      mse_sum += main_mse;
      ++batches;
      row.lr = lr;
      ++step;
    }
    row.train_mse = mse_sum / std::max(batches, 1);
    if (use_val) row.val_mse = split_mse(*model, val, cfg.batch_size);
    const double metric = use_val ? row.val_mse : row.train_mse;
    if (metric < res.best_metric) {
      res.best_metric = metric;
      res.best_epoch = epoch;
      nn::save_checkpoint(res.best_checkpoint, *model, model_json, step, &opt, checkpoint_extra(cfg, row));
    }
    res.log.push_back(row);
    write_train_log(res.log_csv, res.log);
    if (progress) progress(row);
  }
  res.steps = step;
  nn::save_checkpoint(res.last_checkpoint, *model, model_json, step, &opt,
                      res.log.empty() ? nlohmann::json{{"training", cfg}} : checkpoint_extra(cfg, res.log.back()));
  return res;
}

TrainResult train(const TrainConfig& cfg, const dataset::Manifest& manifest, const fs::path& out_dir,
                  const TrainProgress& progress) {
  cfg.check();
  const auto train_set = load_split(manifest, dataset::Split::train, cfg.train_limit);
  const auto val = cfg.validate ? load_split(manifest, dataset::Split::val) : MemorySplit{};
  return train(cfg, train_set, val, out_dir, progress);
}

std::unique_ptr<ConditionedModel<float>> load_model(const fs::path& checkpoint) {
  const auto header = nn::read_checkpoint_header(checkpoint);
  ModelConfig cfg;
  try {
    cfg = header.at("model").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_header, checkpoint.string() + ": " + e.what());
  }
  auto model = build_model<float>(cfg, 0);
  nn::load_checkpoint(checkpoint, *model);
  model->eval();
  return model;
}

}  // namespace tumornet::models
