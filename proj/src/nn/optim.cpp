#include "tumornet/nn/optim.hpp"

#include "tumornet/core/json.hpp"

#include <cmath>
#include <numbers>

namespace tumornet::nn {

std::string to_string(OptimizerConfig::Kind k) {
  switch (k) {
    case OptimizerConfig::Kind::adam:
      return "adam";
    case OptimizerConfig::Kind::adamw:
      return "adamw";
    case OptimizerConfig::Kind::sgd_nesterov:
      return "sgd_nesterov";
  }
  return "adam";
}

void OptimizerConfig::validate() const {
  if (!(lr > 0)) throw Error(ErrorCode::config, "optimizer lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw Error(ErrorCode::config, "optimizer betas must lie in [0,1)");
  if (!(momentum >= 0 && momentum < 1)) throw Error(ErrorCode::config, "momentum must lie in [0,1)");
  if (!(weight_decay >= 0) || !(eps > 0)) throw Error(ErrorCode::config, "weight_decay must be >= 0 and eps > 0");
  if (grad_clip_norm && !(*grad_clip_norm > 0)) throw Error(ErrorCode::config, "grad_clip_norm must be > 0");
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)},       {"lr", c.lr},
                     {"betas", {c.beta1, c.beta2}},    {"eps", c.eps},
                     {"weight_decay", c.weight_decay}, {"momentum", c.momentum},
                     {"grad_clip_norm", c.grad_clip_norm ? nlohmann::json(*c.grad_clip_norm) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  reject_unknown(j, {"kind", "lr", "betas", "eps", "weight_decay", "momentum", "grad_clip_norm"}, "optimizer");
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "adam") c.kind = OptimizerConfig::Kind::adam;
    else if (k == "adamw") c.kind = OptimizerConfig::Kind::adamw;
    else if (k == "sgd_nesterov") c.kind = OptimizerConfig::Kind::sgd_nesterov;
    else throw Error(ErrorCode::config, "unknown optimizer kind '" + k + "'");
  }
  if (j.contains("lr")) j.at("lr").get_to(c.lr);
  if (j.contains("betas")) {
    c.beta1 = j.at("betas").at(0).get<double>();
    c.beta2 = j.at("betas").at(1).get<double>();
  }
  if (j.contains("eps")) j.at("eps").get_to(c.eps);
  if (j.contains("weight_decay")) j.at("weight_decay").get_to(c.weight_decay);
  if (j.contains("momentum")) j.at("momentum").get_to(c.momentum);
  if (j.contains("grad_clip_norm")) {
    const auto& g = j.at("grad_clip_norm");
    c.grad_clip_norm = g.is_null() ? std::nullopt : std::optional<double>(g.get<double>());
  }
  c.validate();
}

std::string to_string(ScheduleSpec::Kind k) {
  switch (k) {
    case ScheduleSpec::Kind::cosine_annealing:
      return "cosine_annealing";
    case ScheduleSpec::Kind::one_cycle:
      return "one_cycle";
    case ScheduleSpec::Kind::poly_decay:
      return "poly_decay";
    case ScheduleSpec::Kind::constant:
      return "constant";
  }
  return "constant";
}

void ScheduleSpec::validate() const {
  // poly_decay and constant ignore eta_min
  const bool uses_min = kind == Kind::cosine_annealing || kind == Kind::one_cycle;
  if (!(eta_max > 0) || (uses_min && !(eta_min > 0 && eta_min <= eta_max))) {
    throw Error(ErrorCode::config, "schedule needs 0 < eta_min <= eta_max");
  }
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw Error(ErrorCode::config, "warmup_fraction must lie in [0,1)");
  if (total_steps < 1) throw Error(ErrorCode::config, "schedule total_steps must be >= 1");
  if (!(poly_power > 0)) throw Error(ErrorCode::config, "poly_power must be > 0");
}

void to_json(nlohmann::json& j, const ScheduleSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},          {"eta_min", s.eta_min},
                     {"eta_max", s.eta_max},                {"total_steps", s.total_steps},
                     {"warmup_fraction", s.warmup_fraction}, {"poly_power", s.poly_power}};
}

void from_json(const nlohmann::json& j, ScheduleSpec& s) {
  reject_unknown(j, {"kind", "eta_min", "eta_max", "total_steps", "warmup_fraction", "poly_power"}, "schedule");
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "cosine_annealing") s.kind = ScheduleSpec::Kind::cosine_annealing;
    else if (k == "one_cycle") s.kind = ScheduleSpec::Kind::one_cycle;
    else if (k == "poly_decay") s.kind = ScheduleSpec::Kind::poly_decay;
    else if (k == "constant") s.kind = ScheduleSpec::Kind::constant;
    else throw Error(ErrorCode::config, "unknown schedule kind '" + k + "'");
  }
  if (j.contains("eta_min")) j.at("eta_min").get_to(s.eta_min);
  if (j.contains("eta_max")) j.at("eta_max").get_to(s.eta_max);
  if (j.contains("total_steps")) j.at("total_steps").get_to(s.total_steps);
  if (j.contains("warmup_fraction")) j.at("warmup_fraction").get_to(s.warmup_fraction);
  if (j.contains("poly_power")) j.at("poly_power").get_to(s.poly_power);
  // total_steps 0 stands for the length of the run, filled in by the trainer
  auto probe = s;
  if (probe.total_steps == 0) probe.total_steps = 1;
  probe.validate();
}

double schedule(const ScheduleSpec& s, std::int64_t t) {
  const double T = static_cast<double>(s.total_steps);
  const double u = std::clamp(static_cast<double>(t), 0.0, T) / T;
  const double pi = std::numbers::pi;
  switch (s.kind) {
    case ScheduleSpec::Kind::cosine_annealing:
      return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(pi * u));
    case ScheduleSpec::Kind::one_cycle: {
      const double w = s.warmup_fraction;
      if (u < w) return s.eta_min + (s.eta_max - s.eta_min) * u / w;
      const double v = w < 1.0 ? (u - w) / (1.0 - w) : 1.0;
      return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(pi * v));
    }
    case ScheduleSpec::Kind::poly_decay:
      return s.eta_max * std::pow(1.0 - u, s.poly_power);
    case ScheduleSpec::Kind::constant:
      return s.eta_max;
  }
  return s.eta_max;
}

template <typename T>
double grad_norm(const std::vector<Tensor<T>>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().template cast<double>().square().sum();
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const T k = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto& p : params) {
      if (p.has_grad()) p.grad() *= k;
    }
  }
  return norm;
}

template <typename T>
Optimizer<T>::Optimizer(std::vector<Tensor<T>> params, OptimizerConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& p : params_) {
    m_.push_back(Tensor<T>::Array::Zero(p.numel()));
    if (cfg_.kind != OptimizerConfig::Kind::sgd_nesterov) v_.push_back(Tensor<T>::Array::Zero(p.numel()));
  }
}

template <typename T>
void Optimizer<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
double Optimizer<T>::step(double lr) {
  if (!(lr > 0)) throw Error(ErrorCode::config, "optimizer step with lr " + std::to_string(lr) + " (must be > 0)");
  const double norm = cfg_.grad_clip_norm ? clip_grad_norm(params_, *cfg_.grad_clip_norm) : grad_norm(params_);
  ++t_;
  const T wd = static_cast<T>(cfg_.weight_decay);
  const T a = static_cast<T>(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    typename Tensor<T>::Array g = p.grad();
    auto& w = p.value();
    switch (cfg_.kind) {
      case OptimizerConfig::Kind::adam:
      case OptimizerConfig::Kind::adamw: {
        if (cfg_.kind == OptimizerConfig::Kind::adam && cfg_.weight_decay != 0.0) g += wd * w;
        if (cfg_.kind == OptimizerConfig::Kind::adamw && cfg_.weight_decay != 0.0) w -= a * wd * w;
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        m_[i] = b1 * m_[i] + (T(1) - b1) * g;
        v_[i] = b2 * v_[i] + (T(1) - b2) * g.square();
        const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
        const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
        w -= a * (m_[i] / c1) / ((v_[i] / c2).sqrt() + static_cast<T>(cfg_.eps));
        break;
      }
      case OptimizerConfig::Kind::sgd_nesterov: {
        if (cfg_.weight_decay != 0.0) g += wd * w;
        const T mu = static_cast<T>(cfg_.momentum);
        m_[i] = t_ == 1 ? g : (mu * m_[i] + g).eval();
        w -= a * (g + mu * m_[i]);
        break;
      }
    }
  }
  return norm;
}

template <typename T>
std::vector<Tensor<T>> Optimizer<T>::state() const {
  std::vector<Tensor<T>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(params_[i].shape(), m_[i]);
    if (!v_.empty()) out.emplace_back(params_[i].shape(), v_[i]);
  }
  return out;
}

template <typename T>
void Optimizer<T>::load_state(const std::vector<Tensor<T>>& s, std::int64_t steps) {
  const std::size_t per = v_.empty() ? 1 : 2;
  if (s.size() != per * params_.size()) {
    throw Error(ErrorCode::shape_mismatch, "optimizer state has " + std::to_string(s.size()) + " tensors, expected " +
                                               std::to_string(per * params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (s[per * i].numel() != params_[i].numel()) throw Error(ErrorCode::shape_mismatch, "optimizer state shape mismatch");
    m_[i] = s[per * i].value();
    if (per == 2) v_[i] = s[per * i + 1].value();
  }
  t_ = steps;
}

template double grad_norm(const std::vector<Tensor<float>>&);
template double grad_norm(const std::vector<Tensor<double>>&);
template double clip_grad_norm(std::vector<Tensor<float>>&, double);
template double clip_grad_norm(std::vector<Tensor<double>>&, double);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace tumornet::nn
