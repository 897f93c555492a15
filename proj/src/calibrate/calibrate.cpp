#include "tumornet/calibrate/calibrate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tumornet/core/json.hpp"
#include "tumornet/eval/metrics.hpp"
#include "tumornet/eval/report.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::calibrate {

namespace fs = std::filesystem;
using field::NormalizedParams;

std::string to_string(LossMode m) {
  return m == LossMode::mse_field ? "mse_field" : "outline_soft_dice";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "mse_field") return LossMode::mse_field;
  if (s == "outline_soft_dice") return LossMode::outline_soft_dice;
  throw Error(ErrorCode::config, "unknown calibration loss '" + s + "' (mse_field, outline_soft_dice)");
}

void CalibrationSettings::validate() const {
  if (starts < 1) throw Error(ErrorCode::config, "calibration.starts must be >= 1");
  if (iterations < 0) throw Error(ErrorCode::config, "calibration.iterations must be >= 0");
  if (!(lr > 0)) throw Error(ErrorCode::config, "calibration.lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw Error(ErrorCode::config, "calibration betas must lie in [0,1)");
  if (!(sharpness > 0)) throw Error(ErrorCode::config, "calibration.sharpness must be > 0");
}

void to_json(nlohmann::json& j, const CalibrationSettings& s) {
  j = {{"mode", to_string(s.mode)}, {"starts", s.starts},       {"iterations", s.iterations},
       {"lr", s.lr},                {"betas", {s.beta1, s.beta2}}, {"eps", s.eps},
       {"sharpness", s.sharpness}};
}

void from_json(const nlohmann::json& j, CalibrationSettings& s) {
  const std::string w = "calibration";
  reject_unknown(j, {"mode", "starts", "iterations", "lr", "betas", "eps", "sharpness"}, w);
  if (j.contains("mode")) s.mode = loss_mode_from_string(j.at("mode").get<std::string>());
  read_optional(j, "starts", s.starts, w);
  read_optional(j, "iterations", s.iterations, w);
  read_optional(j, "lr", s.lr, w);
  if (j.contains("betas")) {
    std::array<double, 2> b{};
    read_optional(j, "betas", b, w);
    s.beta1 = b[0];
    s.beta2 = b[1];
  }
  read_optional(j, "eps", s.eps, w);
  read_optional(j, "sharpness", s.sharpness, w);
  s.validate();
}

void CalibrationProblem::validate(int model_input) const {
  settings.validate();
  ranges.validate();
  tissue.validate();
  const field::Dims d{model_input, model_input, model_input};
  if (tissue.dims() != d) {
    throw Error(ErrorCode::shape_mismatch, "calibration tissue " + field::to_string(tissue.dims()) +
                                               " does not match model grid " + field::to_string(d));
  }
  if (settings.mode == LossMode::mse_field) {
    if (!observation) throw Error(ErrorCode::config, "mse_field calibration needs an observation volume");
    if (observation->dims() != d) {
      throw Error(ErrorCode::shape_mismatch, "observation " + field::to_string(observation->dims()) +
                                                 " does not match model grid " + field::to_string(d));
    }
  } else {
    if (outlines.empty()) throw Error(ErrorCode::config, "outline_soft_dice calibration needs at least one outline");
    for (const auto& o : outlines) {
      if (o.mask.dims() != d) throw Error(ErrorCode::shape_mismatch, "outline mask does not match model grid");
      if (!(o.tau > 0 && o.tau < 1)) throw Error(ErrorCode::config, "outline threshold must lie in (0,1)");
    }
  }
}

namespace {

constexpr double kDiceSmooth = 1e-6;

// Per-sample loss and its derivative with respect to every predicted voxel.
double loss_and_dpred(const CalibrationProblem& p, const double* pred, std::int64_t nv, double* dpred) {
  const auto& s = p.settings;
  if (s.mode == LossMode::mse_field) {
    const float* obs = p.observation->data();
    eval::CompensatedSum acc;
    for (std::int64_t k = 0; k < nv; ++k) {
      const double d = pred[k] - obs[k];
      acc.add(d * d);
      if (dpred) dpred[k] = 2.0 * d / static_cast<double>(nv);
    }
    return acc.value() / static_cast<double>(nv);
  }
  const double K = static_cast<double>(p.outlines.size());
  if (dpred) std::fill(dpred, dpred + nv, 0.0);
  std::vector<double> q(static_cast<std::size_t>(nv));
  double mean_dice = 0.0;
  for (const auto& o : p.outlines) {
    const float* m = o.mask.data();
    eval::CompensatedSum I, P, M;
    for (std::int64_t k = 0; k < nv; ++k) {
      q[k] = 1.0 / (1.0 + std::exp(-(pred[k] - o.tau) / s.sharpness));
      I.add(q[k] * m[k]);
      P.add(q[k]);
      M.add(m[k]);
    }
    const double num = 2.0 * I.value() + kDiceSmooth, den = P.value() + M.value() + kDiceSmooth;
    mean_dice += num / den / K;
    if (dpred) {
      for (std::int64_t k = 0; k < nv; ++k) {
        const double dD_dq = (2.0 * m[k] * den - num) / (den * den);
        dpred[k] -= dD_dq * q[k] * (1.0 - q[k]) / s.sharpness / K;
      }
    }
  }
  return 1.0 - mean_dice;
}

template <typename T>
nn::Tensor<T> tissue_batch(const field::TissueMap& t, int B) {
  const auto& d = t.dims();
  const std::int64_t nv = field::voxel_count(d);
  nn::Tensor<T> x(nn::Shape{B, 3, d[2], d[1], d[0]});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < 3; ++c) {
      const float* src = t.channel(c).data();
      std::copy(src, src + nv, x.data() + (static_cast<std::int64_t>(b) * 3 + c) * nv);
    }
  return x;
}

NormalizedParams uniform_theta(Rng& rng) {
  NormalizedParams t{};
  for (double& v : t) v = uniform01(rng);
  return t;
}

bool finite(const NormalizedParams& t) {
  return std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); });
}

// Lexicographic (loss, start) selection over the best iterates.
void select_best(CalibrationResult& r, const CalibrationProblem& p) {
  bool any = false;
  for (const auto& s : r.starts) {
    if (s.failed) continue;
    if (!any || s.best_loss < r.best_loss) {
      r.best_loss = s.best_loss;
      r.best_start = s.start;
      r.theta_norm = s.theta_best;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::numerical_blowup, "calibration: every start produced a non-finite loss");
  r.theta_raw = field::denormalize_params(r.theta_norm, p.ranges);
}

}  // namespace

template <typename T>
std::vector<double> problem_loss(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                 const std::vector<NormalizedParams>& thetas, std::vector<NormalizedParams>* grad) {
  const int B = static_cast<int>(thetas.size());
  if (B == 0) return {};
  const int n = model.input();
  const std::int64_t nv = static_cast<std::int64_t>(n) * n * n;
  const auto tissue = tissue_batch<T>(p.tissue, B);
  nn::Tensor<T> theta(nn::Shape{B, 5});
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < 5; ++k) theta.data()[b * 5 + k] = static_cast<T>(thetas[b][k]);

  std::vector<double> losses(static_cast<std::size_t>(B));
  std::vector<double> predd(static_cast<std::size_t>(nv));
  if (!grad) {
    const auto pred = model.forward(tissue, theta);
    for (int b = 0; b < B; ++b) {
      std::copy(pred.data() + b * nv, pred.data() + (b + 1) * nv, predd.begin());
      losses[b] = loss_and_dpred(p, predd.data(), nv, nullptr);
    }
    return losses;
  }

  theta.set_requires_grad(true);
  nn::Tape<T> tape;
  {
    nn::TapeScope<T> scope(tape);
    const auto pred = model.forward(tissue, theta);
    nn::Tensor<T> g(pred.shape());
    std::vector<double> dpred(static_cast<std::size_t>(nv));
    for (int b = 0; b < B; ++b) {
      std::copy(pred.data() + b * nv, pred.data() + (b + 1) * nv, predd.begin());
      losses[b] = loss_and_dpred(p, predd.data(), nv, dpred.data());
      for (std::int64_t k = 0; k < nv; ++k) g.data()[b * nv + k] = static_cast<T>(dpred[k]);
    }
    // d/dtheta of sum(pred * g) with g held fixed is the loss gradient.
    tape.backward(nn::sum(nn::mul(pred, g)));
  }
  grad->assign(static_cast<std::size_t>(B), NormalizedParams{});
  if (theta.has_grad()) {
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < 5; ++k) (*grad)[b][k] = static_cast<double>(theta.grad()[b * 5 + k]);
  }
  return losses;
}

template <typename T>
field::Volume3f predict_volume(models::ConditionedModel<T>& model, const field::TissueMap& tissue,
                               const NormalizedParams& theta) {
  const auto x = tissue_batch<T>(tissue, 1);
  nn::Tensor<T> th(nn::Shape{1, 5});
  for (int k = 0; k < 5; ++k) th.data()[k] = static_cast<T>(theta[k]);
  const auto pred = model.forward(x, th);
  field::Volume3f v(tissue.dims());
  std::transform(pred.data(), pred.data() + pred.numel(), v.data(), [](T a) { return static_cast<float>(a); });
  return v;
}

template <typename T>
nlohmann::json observation_report(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                  const NormalizedParams& theta) {
  const auto pred = predict_volume(model, p.tissue, theta);
  auto opt = [](const std::optional<double>& d) { return d ? nlohmann::json(*d) : nlohmann::json(nullptr); };
  if (p.settings.mode == LossMode::mse_field) {
    const auto th = eval::default_thresholds();
    const auto s = eval::score_sample("observation", pred, *p.observation, th);
    nlohmann::json curve = nlohmann::json::array();
    for (std::size_t i = 0; i < th.size(); ++i) curve.push_back({{"threshold", th[i]}, {"dice", opt(s.dice[i])}});
    return {{"mse", s.mse}, {"mae", s.mae}, {"ssim", s.ssim}, {"dice_curve", curve}};
  }
  nlohmann::json outlines = nlohmann::json::array();
  for (const auto& o : p.outlines) {
    // Binary mask: thresholding it at tau returns it unchanged.
    outlines.push_back({{"tau", o.tau}, {"dice", opt(eval::dice(pred, o.mask, o.tau))}});
  }
  return {{"outlines", outlines}};
}

template <typename T>
CalibrationResult calibrate_gradient(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                     std::uint64_t seed) {
  p.validate(model.input());
  const auto t0 = std::chrono::steady_clock::now();
  const auto& s = p.settings;
  model.eval();
  model.set_requires_grad(false);

  CalibrationResult r;
  r.method = "gradient";
  r.iterations = s.iterations;
  const int S = s.starts;
  std::vector<NormalizedParams> theta(S), m(S), v(S);
  std::vector<int> age(S, 0);  // Adam step count since the last (re)start
  r.starts.resize(S);
  for (int k = 0; k < S; ++k) {
    if (k == 0) {
      theta[k].fill(0.5);
    } else {
      Rng rng(derive_seed(seed, 0, static_cast<std::uint64_t>(k)));
      theta[k] = uniform_theta(rng);
    }
    r.starts[k].start = k;
    r.starts[k].theta_init = theta[k];
    r.starts[k].best_loss = std::numeric_limits<double>::infinity();
  }

  std::vector<int> active;
  for (int k = 0; k < S; ++k) active.push_back(k);
  for (int it = 0; it <= s.iterations && !active.empty(); ++it) {
    const bool last = it == s.iterations;
    std::vector<NormalizedParams> batch;
    for (int k : active) batch.push_back(theta[k]);
    std::vector<NormalizedParams> grad;
    const auto losses = problem_loss(model, p, batch, last ? nullptr : &grad);
    r.forward_passes += static_cast<std::int64_t>(batch.size());

    std::vector<int> still;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int k = active[a];
      auto& tr = r.starts[k];
      const double L = losses[a];
      if (!std::isfinite(L) || (!last && !finite(grad[a]))) {
        if (tr.restarts == 0) {
          // Restart this chain once from a fresh draw.
          tr.restarts = 1;
          Rng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(k)));
          theta[k] = uniform_theta(rng);
          m[k] = {};
          v[k] = {};
          age[k] = 0;
          if (!last) still.push_back(k);
        } else {
          tr.failed = true;
        }
        continue;
      }
      tr.loss.push_back(L);
      tr.thetas.push_back(theta[k]);
      if (L < tr.best_loss) {
        tr.best_loss = L;
        tr.theta_best = theta[k];
      }
      tr.best_so_far.push_back(tr.best_loss);
      if (last) continue;
      const int t = ++age[k];
      const double bc1 = 1.0 - std::pow(s.beta1, t), bc2 = 1.0 - std::pow(s.beta2, t);
      for (int j = 0; j < 5; ++j) {
        const double g = grad[a][j];
        m[k][j] = s.beta1 * m[k][j] + (1.0 - s.beta1) * g;
        v[k][j] = s.beta2 * v[k][j] + (1.0 - s.beta2) * g * g;
        theta[k][j] -= s.lr * (m[k][j] / bc1) / (std::sqrt(v[k][j] / bc2) + s.eps);
        theta[k][j] = std::clamp(theta[k][j], 0.0, 1.0);
      }
      still.push_back(k);
    }
    active = std::move(still);
  }
  select_best(r, p);
  r.report = observation_report(model, p, r.theta_norm);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

template <typename T>
CalibrationResult random_search_baseline(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                         std::int64_t budget, std::uint64_t seed) {
  p.validate(model.input());
  if (budget < 1) throw Error(ErrorCode::invalid_argument, "random search budget must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  model.eval();
  CalibrationResult r;
  r.method = "random_search";
  r.iterations = static_cast<int>(budget);
  r.starts.resize(1);
  auto& tr = r.starts[0];
  tr.best_loss = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  constexpr int kChunk = 8;
  for (std::int64_t i = 0; i < budget; i += kChunk) {
    std::vector<NormalizedParams> batch;
    for (std::int64_t k = i; k < std::min(budget, i + kChunk); ++k) batch.push_back(uniform_theta(rng));
    const auto losses = problem_loss(model, p, batch);
    r.forward_passes += static_cast<std::int64_t>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (i == 0 && k == 0) tr.theta_init = batch[0];
      tr.loss.push_back(losses[k]);
      tr.thetas.push_back(batch[k]);
      if (std::isfinite(losses[k]) && losses[k] < tr.best_loss) {
        tr.best_loss = losses[k];
        tr.theta_best = batch[k];
      }
      tr.best_so_far.push_back(tr.best_loss);
    }
  }
  tr.failed = !std::isfinite(tr.best_loss);
  select_best(r, p);
  r.report = observation_report(model, p, r.theta_norm);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

nlohmann::json result_json(const CalibrationResult& r, const CalibrationProblem& p) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts) {
    starts.push_back({{"start", s.start},
                      {"theta_init", s.theta_init},
                      {"theta_best", s.theta_best},
                      {"best_loss", finite_or_null(s.best_loss)},
                      {"final_loss", s.loss.empty() ? nlohmann::json(nullptr) : finite_or_null(s.loss.back())},
                      {"evaluations", s.loss.size()},
                      {"restarts", s.restarts},
                      {"failed", s.failed},
                      {"trace", "trace_start" + std::to_string(s.start) + ".csv"}});
  }
  nlohmann::json j = {{"method", r.method},
          {"settings", p.settings},
          {"ranges", p.ranges},
          {"theta_norm", r.theta_norm},
          {"theta_raw", r.theta_raw},
          {"best_loss", r.best_loss},
          {"best_start", r.best_start},
          {"iterations", r.iterations},
          {"forward_passes", r.forward_passes},
          {"report", r.report},
          {"starts", starts}};
  if (p.theta_true) {
    double err = 0.0;
    for (int k = 0; k < 5; ++k) err = std::max(err, std::abs(r.theta_norm[k] - (*p.theta_true)[k]));
    j["theta_true"] = *p.theta_true;
    j["theta_error_inf"] = err;
  }
  return j;
}

void write_result(const fs::path& dir, const CalibrationResult& r, const CalibrationProblem& p) {
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "calibration_result.json");
    if (!f) throw Error(ErrorCode::io, "cannot write " + (dir / "calibration_result.json").string());
    f << result_json(r, p).dump(2) << '\n';
  }
  for (const auto& s : r.starts) {
    const auto path = dir / ("trace_start" + std::to_string(s.start) + ".csv");
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
    f << "evaluation,loss,best_loss,rho,d_w,x,y,z\n";
    char buf[64];
    for (std::size_t i = 0; i < s.loss.size(); ++i) {
      f << i;
      for (double v : {s.loss[i], s.best_so_far[i]}) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        f << buf;
      }
      for (double v : s.thetas[i]) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        f << buf;
      }
      f << '\n';
    }
  }
  std::ofstream f(dir / "timing.json");
  f << nlohmann::json{{"wall_time_s", r.wall_time_s}}.dump(2) << '\n';
}

#define TUMORNET_INSTANTIATE_CALIBRATE(T)                                                                     \
  template std::vector<double> problem_loss(models::ConditionedModel<T>&, const CalibrationProblem&,         \
                                            const std::vector<NormalizedParams>&, std::vector<NormalizedParams>*); \
  template CalibrationResult calibrate_gradient(models::ConditionedModel<T>&, const CalibrationProblem&,      \
                                                std::uint64_t);                                                \
  template CalibrationResult random_search_baseline(models::ConditionedModel<T>&, const CalibrationProblem&,  \
                                                    std::int64_t, std::uint64_t);                              \
  template nlohmann::json observation_report(models::ConditionedModel<T>&, const CalibrationProblem&,          \
                                             const NormalizedParams&);                                         \
  template field::Volume3f predict_volume(models::ConditionedModel<T>&, const field::TissueMap&,               \
                                          const NormalizedParams&);

TUMORNET_INSTANTIATE_CALIBRATE(float)
TUMORNET_INSTANTIATE_CALIBRATE(double)

}  // namespace tumornet::calibrate
