#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/field/params.hpp"
#include "tumornet/field/tissue.hpp"
#include "tumornet/models/model.hpp"

namespace tumornet::calibrate {

enum class LossMode { mse_field, outline_soft_dice };
std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

struct Outline {
  field::Volume3f mask;  // binary
  double tau = 0.25;
};

struct CalibrationSettings {
  LossMode mode = LossMode::mse_field;
  int starts = 8;
  int iterations = 300;  // gradient steps per start
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double sharpness = 0.05;  // outline mode soft threshold width

  void validate() const;
};

void to_json(nlohmann::json& j, const CalibrationSettings& s);
void from_json(const nlohmann::json& j, CalibrationSettings& s);

// Everything lives on the model grid; theta is the model-frame normalized
// vector (rho, d_w, seed x, y, z), and `ranges` maps it to raw values.
struct CalibrationProblem {
  field::TissueMap tissue;
  std::optional<field::Volume3f> observation;  // mse_field
  std::vector<Outline> outlines;               // outline_soft_dice
  field::ParamRanges ranges;
  CalibrationSettings settings;
  // Known generating parameters, if any; only used for reporting.
  std::optional<field::NormalizedParams> theta_true;

  void validate(int model_input) const;
};

struct StartTrace {
  int start = 0;
  field::NormalizedParams theta_init{};
  field::NormalizedParams theta_best{};
  double best_loss = 0.0;
  int restarts = 0;
  bool failed = false;
  std::vector<double> loss;       // loss of every evaluated iterate
  std::vector<double> best_so_far;
  std::vector<field::NormalizedParams> thetas;
};

struct CalibrationResult {
  std::string method;  // "gradient" or "random_search"
  field::NormalizedParams theta_norm{};
  field::GrowthParams theta_raw;
  double best_loss = 0.0;
  int best_start = 0;
  int iterations = 0;
  std::int64_t forward_passes = 0;  // per-sample forward evaluations
  double wall_time_s = 0.0;
  std::vector<StartTrace> starts;
  // Metrics of the prediction at theta_norm against the observation: mse,
  // mae, ssim and the dice curve for a field, per-outline dice otherwise.
  nlohmann::json report;
};

// Per-sample losses of theta (B, 5) against the problem's observation. With
// `grad` non-null the gradient of the summed loss with respect to theta is
// written there (B, 5). The model must be in eval mode.
template <typename T>
std::vector<double> problem_loss(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                 const std::vector<field::NormalizedParams>& thetas,
                                 std::vector<field::NormalizedParams>* grad = nullptr);

// Multistart Adam on theta_norm with clamping to [0,1] after each step; the
// first start is the centre, the rest uniform draws. Every start evaluates
// iterations + 1 iterates; the best iterate over all starts wins, ties going
// to the lower start index.
template <typename T>
CalibrationResult calibrate_gradient(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                     std::uint64_t seed);

// Best of `budget` uniform draws in [0,1]^5.
template <typename T>
CalibrationResult random_search_baseline(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                         std::int64_t budget, std::uint64_t seed);

// Scores model(tissue, theta) against the problem's observation. The extra
// forward pass is not counted in forward_passes.
template <typename T>
nlohmann::json observation_report(models::ConditionedModel<T>& model, const CalibrationProblem& p,
                                  const field::NormalizedParams& theta);

// Model prediction for one theta as a volume on the model grid.
template <typename T>
field::Volume3f predict_volume(models::ConditionedModel<T>& model, const field::TissueMap& tissue,
                               const field::NormalizedParams& theta);

// calibration_result.json (deterministic: no timing), trace_start<k>.csv per
// start, and timing.json with the wall time.
void write_result(const std::filesystem::path& dir, const CalibrationResult& r, const CalibrationProblem& p);
nlohmann::json result_json(const CalibrationResult& r, const CalibrationProblem& p);

}  // namespace tumornet::calibrate
