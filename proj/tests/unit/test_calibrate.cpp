#include <doctest.h>

#include <cmath>
#include <fstream>

#include "tumornet/calibrate/calibrate.hpp"

using namespace tumornet;
using namespace tumornet::calibrate;
using field::NormalizedParams;

namespace {

models::ModelConfig tiny_vit() {
  models::ModelConfig c;
  c.arch = models::Arch::vit3d;
  c.vit.input = 8;
  c.vit.patch = 4;
  c.vit.dim = 8;
  c.vit.depth = 1;
  c.vit.heads = 2;
  c.vit.init = nn::InitKind::kaiming_normal;
  return c;
}

models::ModelConfig tiny_ts() {
  models::ModelConfig c;
  c.arch = models::Arch::tumorsurrogate;
  c.ts.input = 8;
  c.ts.channels = {2, 3};
  c.ts.batch_norm = false;
  c.ts.init = nn::InitKind::torch_default;
  c.ts.param_channels = 2;
  c.ts.head_channels = 2;
  return c;
}

field::TissueMap random_tissue(int n, std::uint64_t seed) {
  Rng rng(seed);
  field::TissueMap t;
  const field::Dims d{n, n, n};
  t.wm = field::Volume3f(d);
  t.gm = field::Volume3f(d);
  t.csf = field::Volume3f(d);
  for (std::int64_t i = 0; i < field::voxel_count(d); ++i) {
    const double a = uniform01(rng), b = uniform01(rng) * (1 - a);
    t.wm.data()[i] = static_cast<float>(a);
    t.gm.data()[i] = static_cast<float>(b);
    t.csf.data()[i] = static_cast<float>(0.5 * (1 - a - b));
  }
  return t;
}

// Observation produced by the model itself at theta_star.
template <typename T>
CalibrationProblem self_problem(models::ConditionedModel<T>& m, const NormalizedParams& theta_star, LossMode mode) {
  CalibrationProblem p;
  const int n = m.input();
  p.tissue = random_tissue(n, 5);
  p.settings.mode = mode;
  p.settings.starts = 3;
  p.settings.iterations = 10;
  m.eval();
  nn::Tensor<T> x(nn::Shape{1, 3, n, n, n}), th(nn::Shape{1, 5});
  for (int c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < n * n * n; ++i) x.data()[c * n * n * n + i] = p.tissue.channel(c).data()[i];
  for (int k = 0; k < 5; ++k) th.data()[k] = static_cast<T>(theta_star[k]);
  const auto pred = m.forward(x, th);
  field::Volume3f obs(field::Dims{n, n, n});
  for (std::int64_t i = 0; i < n * n * n; ++i) obs.data()[i] = static_cast<float>(pred.data()[i]);
  if (mode == LossMode::mse_field) {
    p.observation = obs;
  } else {
    for (double tau : {0.45, 0.5}) {
      Outline o;
      o.tau = tau;
      o.mask = field::Volume3f(obs.dims());
      for (std::int64_t i = 0; i < obs.size(); ++i) o.mask.data()[i] = obs.data()[i] >= tau ? 1.0f : 0.0f;
      p.outlines.push_back(o);
    }
  }
  return p;
}

template <typename T>
double max_fd_error(models::ConditionedModel<T>& m, const CalibrationProblem& p, const NormalizedParams& theta,
                    double h) {
  std::vector<NormalizedParams> g;
  problem_loss(m, p, {theta}, &g);
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    auto a = theta, b = theta;
    a[k] += h;
    b[k] -= h;
    const double fd = (problem_loss(m, p, {a})[0] - problem_loss(m, p, {b})[0]) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[0][k]) / std::max({std::abs(fd), std::abs(g[0][k]), 1e-3}));
  }
  return worst;
}

}  // namespace

TEST_CASE("calibration loss gradient matches finite differences") {
  const NormalizedParams star{0.3, 0.6, 0.4, 0.55, 0.5}, at{0.5, 0.4, 0.6, 0.45, 0.35};
  for (auto mode : {LossMode::mse_field, LossMode::outline_soft_dice}) {
    CAPTURE(to_string(mode));
    auto md = models::build_model<double>(tiny_vit(), 3);
    auto pd = self_problem(*md, star, mode);
    CHECK(max_fd_error(*md, pd, at, 1e-5) <= 1e-4);

    auto mf = models::build_model<float>(tiny_vit(), 3);
    auto pf = self_problem(*mf, star, mode);
    CHECK(max_fd_error(*mf, pf, at, 1e-2) <= 1e-2);
  }
}

TEST_CASE("calibration loss is zero at the generating parameters") {
  auto m = models::build_model<double>(tiny_ts(), 1);
  const NormalizedParams star{0.3, 0.6, 0.4, 0.55, 0.5};
  auto p = self_problem(*m, star, LossMode::mse_field);
  CHECK(problem_loss(*m, p, {star})[0] <= 1e-12);
}

TEST_CASE("gradient calibration: zero iterations returns the initial iterates") {
  auto m = models::build_model<float>(tiny_ts(), 1);
  auto p = self_problem(*m, {0.3, 0.6, 0.4, 0.55, 0.5}, LossMode::mse_field);
  p.settings.iterations = 0;
  const auto r = calibrate_gradient(*m, p, 11);
  REQUIRE(r.starts.size() == 3);
  CHECK(r.forward_passes == 3);
  for (const auto& s : r.starts) {
    REQUIRE(s.loss.size() == 1);
    CHECK(s.theta_best == s.theta_init);
    CHECK(s.best_loss == s.loss[0]);
    CHECK(s.best_loss == problem_loss(*m, p, {s.theta_init})[0]);
  }
  CHECK(r.starts[0].theta_init == NormalizedParams{0.5, 0.5, 0.5, 0.5, 0.5});
}

TEST_CASE("gradient calibration: bounds, monotone best, budget and determinism") {
  auto m = models::build_model<float>(tiny_ts(), 1);
  for (auto mode : {LossMode::mse_field, LossMode::outline_soft_dice}) {
    CAPTURE(to_string(mode));
    auto p = self_problem(*m, {0.1, 0.9, 0.2, 0.8, 0.5}, mode);
    p.settings.lr = 0.3;  // large steps push iterates into the box faces
    const auto r = calibrate_gradient(*m, p, 4);
    CHECK(r.forward_passes == 3 * 11);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : r.starts) {
      REQUIRE(s.loss.size() == 11);
      for (std::size_t i = 0; i < s.loss.size(); ++i) {
        for (double v : s.thetas[i]) CHECK((v >= 0.0 && v <= 1.0));
        if (i > 0) CHECK(s.best_so_far[i] <= s.best_so_far[i - 1]);
        CHECK(s.best_so_far[i] <= s.loss[i]);
      }
      CHECK(s.best_loss <= s.loss.front());
      best = std::min(best, s.best_loss);
    }
    CHECK(r.best_loss == best);
    CHECK(r.theta_raw == field::denormalize_params(r.theta_norm, p.ranges));
    const auto again = calibrate_gradient(*m, p, 4);
    CHECK(result_json(again, p) == result_json(r, p));
    CHECK(result_json(calibrate_gradient(*m, p, 5), p) != result_json(r, p));
  }
}

TEST_CASE("gradient calibration reduces the self-consistency loss") {
  auto m = models::build_model<double>(tiny_vit(), 2);
  auto p = self_problem(*m, {0.3, 0.7, 0.35, 0.6, 0.45}, LossMode::mse_field);
  p.settings.iterations = 40;
  const auto r = calibrate_gradient(*m, p, 1);
  for (const auto& s : r.starts) CHECK(s.best_loss < s.loss.front());
}

TEST_CASE("random search: prefix consistency and budget accounting") {
  auto m = models::build_model<float>(tiny_ts(), 1);
  auto p = self_problem(*m, {0.3, 0.6, 0.4, 0.55, 0.5}, LossMode::mse_field);
  const auto one = random_search_baseline(*m, p, 1, 9);
  CHECK(one.forward_passes == 1);
  CHECK(one.theta_norm == one.starts[0].theta_init);
  CHECK(one.best_loss == problem_loss(*m, p, {one.theta_norm})[0]);

  const auto small = random_search_baseline(*m, p, 10, 9), big = random_search_baseline(*m, p, 30, 9);
  CHECK(big.forward_passes == 30);
  CHECK(big.best_loss <= small.best_loss);
  for (std::size_t i = 0; i < 10; ++i) CHECK(big.starts[0].thetas[i] == small.starts[0].thetas[i]);
  for (double v : big.theta_norm) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(random_search_baseline(*m, p, 0, 9), Error);
}

TEST_CASE("calibration problem validation") {
  auto m = models::build_model<float>(tiny_ts(), 1);
  auto p = self_problem(*m, {0.3, 0.6, 0.4, 0.55, 0.5}, LossMode::mse_field);
  auto q = p;
  q.observation.reset();
  CHECK_THROWS_AS(calibrate_gradient(*m, q, 1), Error);
  q = p;
  q.settings.mode = LossMode::outline_soft_dice;
  CHECK_THROWS_AS(calibrate_gradient(*m, q, 1), Error);
  q = p;
  q.tissue = random_tissue(4, 1);
  CHECK_THROWS_AS(calibrate_gradient(*m, q, 1), Error);
  q = p;
  q.settings.starts = 0;
  CHECK_THROWS_AS(calibrate_gradient(*m, q, 1), Error);

  CalibrationSettings s;
  CHECK_THROWS_AS(nlohmann::json({{"bogus", 1}}).get<CalibrationSettings>(), Error);
  CHECK_THROWS_AS(nlohmann::json({{"mode", "l1"}}).get<CalibrationSettings>(), Error);
  s.mode = LossMode::outline_soft_dice;
  s.starts = 4;
  CHECK(nlohmann::json(s).get<CalibrationSettings>().starts == 4);
  CHECK(nlohmann::json(s).get<CalibrationSettings>().mode == LossMode::outline_soft_dice);
}

TEST_CASE("calibration output files") {
  auto m = models::build_model<float>(tiny_ts(), 1);
  auto p = self_problem(*m, {0.3, 0.6, 0.4, 0.55, 0.5}, LossMode::mse_field);
  p.settings.iterations = 2;
  const auto r = calibrate_gradient(*m, p, 3);
  const auto dir = std::filesystem::temp_directory_path() / "tumornet_calib_test";
  std::filesystem::remove_all(dir);
  write_result(dir, r, p);
  CHECK(std::filesystem::exists(dir / "calibration_result.json"));
  CHECK(std::filesystem::exists(dir / "timing.json"));
  for (int k = 0; k < 3; ++k) {
    std::ifstream f(dir / ("trace_start" + std::to_string(k) + ".csv"));
    std::string line;
    int rows = 0;
    std::getline(f, line);
    CHECK(line == "evaluation,loss,best_loss,rho,d_w,x,y,z");
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 3);
  }
  const auto j = nlohmann::json::parse(std::ifstream(dir / "calibration_result.json"));
  CHECK(j.at("forward_passes") == 9);
  CHECK(!j.contains("wall_time_s"));
  std::filesystem::remove_all(dir);
}
