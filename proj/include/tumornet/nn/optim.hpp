#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/nn/tensor.hpp"

namespace tumornet::nn {

struct OptimizerConfig {
  enum class Kind { adam, adamw, sgd_nesterov };
  Kind kind = Kind::adam;
  double lr = 1e-4;  // base rate; a schedule overrides it per step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double momentum = 0.99;
  std::optional<double> grad_clip_norm = 1.0;

  void validate() const;
};

std::string to_string(OptimizerConfig::Kind k);
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

struct ScheduleSpec {
  enum class Kind { cosine_annealing, one_cycle, poly_decay, constant };
  Kind kind = Kind::constant;
  double eta_min = 1e-6;
  double eta_max = 1e-4;
  std::int64_t total_steps = 1;
  double warmup_fraction = 0.1;  // one_cycle only
  double poly_power = 0.9;

  void validate() const;
};

std::string to_string(ScheduleSpec::Kind k);
void to_json(nlohmann::json& j, const ScheduleSpec& s);
void from_json(const nlohmann::json& j, ScheduleSpec& s);

// Learning rate at step t (clamped to [0, total_steps]).
//   cosine_annealing  eta_min + (eta_max - eta_min) (1 + cos(pi t / T)) / 2
//   one_cycle         linear eta_min -> eta_max over warmup_fraction * T, then
//                     cosine back down to eta_min
//   poly_decay        eta_max (1 - t / T)^poly_power
//   constant          eta_max
double schedule(const ScheduleSpec& s, std::int64_t t);

// Scales every gradient so the global L2 norm is at most max_norm. Returns
// the norm before clipping. Parameters without a gradient are skipped.
template <typename T>
double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm);

template <typename T>
double grad_norm(const std::vector<Tensor<T>>& params);

template <typename T>
class Optimizer {
 public:
  Optimizer(std::vector<Tensor<T>> params, OptimizerConfig cfg);

  // Clips (when configured) and updates every parameter that has a gradient.
  // Returns the pre-clip gradient norm.
  double step(double lr);
  void zero_grad();

  const OptimizerConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }
  std::vector<Tensor<T>>& params() { return params_; }

  // Moment buffers in parameter order: adam/adamw give m then v per
  // parameter, sgd gives one momentum buffer.
  std::vector<Tensor<T>> state() const;
  void load_state(const std::vector<Tensor<T>>& s, std::int64_t steps);

 private:
  std::vector<Tensor<T>> params_;
  OptimizerConfig cfg_;
  std::vector<typename Tensor<T>::Array> m_, v_;
  std::int64_t t_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace tumornet::nn
