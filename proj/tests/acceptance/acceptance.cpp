// Acceptance run: one PASS/FAIL line per criterion A1..A9.
//
// Expensive artifacts (the desk dataset, trained checkpoints, calibration
// sweeps) live in a cache directory keyed by a fingerprint of the settings
// that produced them; metrics are always recomputed from the artifacts.

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "tumornet/calibrate/calibrate.hpp"
#include "tumornet/cli/cli.hpp"
#include "tumornet/dataset/generate.hpp"
#include "tumornet/dataset/phantom.hpp"
#include "tumornet/eval/report.hpp"
#include "tumornet/field/transforms.hpp"
#include "tumornet/models/gradcheck_cases.hpp"
#include "tumornet/models/train.hpp"
#include "tumornet/pde/solver.hpp"

using namespace tumornet;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string fingerprint(const json& j) { return fmt("%016zx", std::hash<std::string>{}(j.dump())); }

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << '\n';
}

// Reuses `dir` when its stamp matches `key`, otherwise rebuilds it.
template <typename F>
bool cached(const fs::path& dir, const json& key, bool rebuild, F&& build) {
  const auto stamp = dir / "cache_key.json";
  if (!rebuild && fs::exists(stamp) && read_json(stamp) == key) return true;
  fs::remove_all(dir);
  fs::create_directories(dir);
  build();
  write_json(stamp, key);
  return false;
}

std::map<std::string, std::string> read_tree(const fs::path& root, const std::vector<std::string>& skip) {
  std::map<std::string, std::string> files;
  if (!fs::exists(root)) return files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    if (std::find(skip.begin(), skip.end(), e.path().filename().string()) != skip.end()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

struct Context {
  fs::path cache;
  bool rebuild = false;
  std::uint64_t seed = 2024;
};

// ---------------------------------------------------------------- PDE

Outcome a1_logistic() {
  const auto t0 = Clock::now();
  const field::Dims d{32, 32, 32};
  pde::DiffusionField none{field::Volume3d(d, 0.0)};
  pde::SimulationConfig cfg;
  cfg.t_end = 10.0;
  cfg.dt = 0.01;
  const auto out = pde::integrate(field::Volume3d(d, 0.1), none, 0.1, cfg).final_state;
  const double expected = 0.23197;
  const double err = ((out.array() - expected).abs() / expected).maxCoeff();
  const double secs = seconds_since(t0);
  return {err <= 1e-3 && secs < 1.0, fmt("max rel err %.2e vs 0.23197 (tol 1e-3), %.2f s (limit 1 s)", err, secs)};
}

Outcome a2_conservation() {
  const auto t0 = Clock::now();
  dataset::PhantomSpec spec;
  spec.dims = {32, 32, 32};
  const auto tissue = dataset::gen_phantom(spec, 7);
  // Seed coordinates away from rounding ties so that the seed voxel mirrors exactly.
  const field::GrowthParams p{0.15, 0.5, {0.45, 0.55, 0.42}};

  // rho = 0: 1000 steps of pure diffusion.
  pde::SimulationConfig cfg;
  cfg.clamp = false;
  const auto f = pde::build_diffusion_field(tissue, p, cfg);
  const auto c0 = pde::seed_initial_condition(tissue, p);
  const double dt = pde::stable_dt(f, p.rho, 1.0);
  cfg.dt = dt;
  cfg.t_end = 1000 * dt;
  const auto diffused = pde::integrate(c0, f, 0.0, cfg);
  const double m0 = c0.array().sum();
  const double drift = std::abs(diffused.final_state.array().sum() - m0) / m0;

  // Clamp off at the top of the growth range.
  cfg = {};
  cfg.clamp = false;
  cfg.t_end = 100.0;
  const auto grown = pde::simulate(tissue, p, cfg).final_state;
  const double lo = grown.array().minCoeff(), hi = grown.array().maxCoeff();

  // Mirroring the tissue and seed mirrors the solution.
  double equi = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const auto t = field::AxisTransform::mirror(axis);
    field::TissueMap mt{field::orient(tissue.wm, t), field::orient(tissue.gm, t), field::orient(tissue.csf, t)};
    auto mp = p;
    mp.seed = t.apply_normalized(p.seed);
    const auto mirrored = pde::simulate(mt, mp, cfg).final_state;
    equi = std::max(equi, (mirrored.array() - field::orient(grown, t).array()).abs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  const bool pass = diffused.steps == 1000 && drift <= 1e-6 && lo >= 0.0 && hi <= 1.0 + 1e-4 && equi <= 1e-5 &&
                    secs < 30.0;
  return {pass, fmt("mass drift %.1e over %d steps, clamp-off range [%.2e, %.6f], mirror err %.1e, %.1f s", drift,
                    diffused.steps, lo, hi, equi, secs)};
}

// ---------------------------------------------------------------- nn

Outcome a3_gradcheck() {
  const auto t0 = Clock::now();
  int n = 0, failed = 0;
  double worst = 0.0;
  std::string worst_name, failures;
  for (const auto& c : models::all_gradcheck_cases()) {
    const auto r = c.run({});
    ++n;
    if (r.max_rel_error > 1e-3) {
      ++failed;
      failures += " " + c.name;
    }
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_name = c.name;
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 300.0, fmt("%d/%d cases <= 1e-3, worst %.2e (%s), %.1f s%s", n - failed, n, worst,
                                           worst_name.c_str(), secs, failures.empty() ? "" : (" FAILED:" + failures).c_str())};
}

// ---------------------------------------------------------------- models

dataset::Manifest desk_subset(const Context& ctx, const std::string& name, std::size_t n_train, std::size_t n_val,
                              std::size_t n_test, std::uint64_t seed) {
  const auto dir = ctx.cache / name;
  const json key = {{"n", {n_train, n_val, n_test}}, {"seed", seed}, {"kind", "desk dataset v1"}};
  cached(dir, key, ctx.rebuild, [&] {
    std::cout << "  generating " << name << " (" << n_train + n_val + n_test << " samples)" << std::endl;
    dataset::generate_dataset(n_train, n_val, n_test, dataset::PhantomSpec{}, {}, {}, seed, dir);
  });
  return dataset::load_manifest(dir);
}

models::TrainConfig overfit_config() {
  auto cfg = models::preset_training(models::Arch::tumorsurrogate, models::Preset::desk);
  cfg.augment = false;
  cfg.validate = false;
  cfg.batch_size = 4;
  cfg.max_steps = 2000;
  cfg.epochs = 500;  // 16 samples, 4 steps per epoch
  cfg.seed = 4;
  return cfg;
}

Outcome a4_overfit(const Context& ctx) {
  const auto m = desk_subset(ctx, "a4_data", 16, 0, 0, 4);
  const auto cfg = overfit_config();
  const auto dir = ctx.cache / "a4_train";
  const auto split = models::load_split(m, dataset::Split::train);
  const bool hit = cached(dir, {{"training", cfg}, {"data", "a4_data"}}, ctx.rebuild, [&] {
    std::cout << "  training A4 overfit run (2000 steps)" << std::endl;
    const auto t0 = Clock::now();
    const auto r = models::train(cfg, split, {}, dir, [](const models::EpochLog& e) {
      if (e.epoch % 50 == 0) std::cout << fmt("    epoch %d train_mse %.3e", e.epoch, e.train_mse) << std::endl;
    });
    write_json(dir / "run.json", {{"seconds", seconds_since(t0)}, {"steps", r.steps}});
  });
  const auto run = read_json(dir / "run.json");
  auto model = models::load_model(dir / "last.ckpt");
  const double mse = models::split_mse(*model, split);
  const double secs = run.at("seconds");
  const std::int64_t steps = run.at("steps");
  return {mse <= 1e-4 && steps <= 2000 && secs < 1800.0,
          fmt("eval-mode train mse %.2e (tol 1e-4) after %lld steps, training %.0f s%s", mse,
              static_cast<long long>(steps), secs, hit ? " (cached run)" : "")};
}

struct DeskModel {
  dataset::Manifest data;
  fs::path checkpoint;
  double train_seconds = 0;
  bool cached = false;
};

DeskModel desk_model(const Context& ctx) {
  DeskModel d;
  d.data = desk_subset(ctx, "desk_data", 512, 64, 64, ctx.seed);
  auto cfg = models::preset_training(models::Arch::tumorsurrogate, models::Preset::desk);
  cfg.seed = ctx.seed;
  const auto dir = ctx.cache / "desk_train";
  d.cached = cached(dir, {{"training", cfg}, {"data", "desk_data"}}, ctx.rebuild, [&] {
    std::cout << "  training TS desk preset on 512 samples" << std::endl;
    const auto t0 = Clock::now();
    models::train(cfg, d.data, dir, [](const models::EpochLog& e) {
      std::cout << fmt("    epoch %d train_mse %.3e val_mse %.3e", e.epoch, e.train_mse, e.val_mse) << std::endl;
    });
    write_json(dir / "run.json", {{"seconds", seconds_since(t0)}});
  });
  d.checkpoint = dir / "best.ckpt";
  d.train_seconds = read_json(dir / "run.json").at("seconds");
  return d;
}

Outcome a5_generalization(const Context& ctx, const DeskModel& dm) {
  eval::EvalOptions opts;
  opts.split = dataset::Split::test;
  const auto rep = eval::evaluate(eval::Predictor::from_checkpoint(dm.checkpoint), dm.data, opts);
  const auto report_dir = ctx.cache / "desk_eval";
  eval::write_report(report_dir, rep);

  // Best constant: the mean test voxel, scored the same way (mean per-sample mse).
  const auto test = models::load_split(dm.data, dataset::Split::test);
  eval::CompensatedSum s;
  std::size_t n = 0;
  for (const auto& smp : test.samples)
    for (float v : smp.target) s.add(v), ++n;
  const double c = s.value() / static_cast<double>(n);
  std::vector<double> per;
  for (const auto& smp : test.samples) {
    eval::CompensatedSum e;
    for (float v : smp.target) e.add((v - c) * (v - c));
    per.push_back(e.value() / static_cast<double>(smp.target.size()));
  }
  const double baseline = eval::aggregate(per).mean;
  const auto th = rep.thresholds;
  const auto it = std::find_if(th.begin(), th.end(), [](double t) { return std::abs(t - 0.25) < 1e-12; });
  const double dice25 = rep.dice[static_cast<std::size_t>(it - th.begin())].mean;
  const bool pass = rep.mse.mean <= 0.5 * baseline && dice25 >= 0.6;
  return {pass, fmt("test mse %.3e vs best constant %.3e (ratio %.3f, need <= 0.5), dice@0.25 %.3f (need >= 0.6), "
                    "mae %.3e, ssim %.3f; report in %s; training %.0f s%s",
                    rep.mse.mean, baseline, rep.mse.mean / baseline, dice25, rep.mae.mean, rep.ssim.mean,
                    report_dir.string().c_str(), dm.train_seconds, dm.cached ? " (cached)" : "")};
}

// ---------------------------------------------------------------- calibrate

std::vector<calibrate::CalibrationProblem> self_problems(models::ConditionedModel<float>& model,
                                                         const dataset::Manifest& m, int count) {
  std::vector<calibrate::CalibrationProblem> out;
  const auto recs = m.split(dataset::Split::test);
  for (int i = 0; i < count; ++i) {
    const auto& rec = *recs.at(static_cast<std::size_t>(i));
    calibrate::CalibrationProblem p;
    p.tissue = dataset::load_sample(m, rec).tissue;
    p.ranges = m.ranges;
    p.theta_true = rec.theta_norm;
    p.observation = calibrate::predict_volume(model, p.tissue, rec.theta_norm);
    out.push_back(std::move(p));
  }
  return out;
}

Outcome a6_self_consistency(const Context& ctx, const DeskModel& dm) {
  auto model = models::load_model(dm.checkpoint);
  auto problems = self_problems(*model, dm.data, 10);
  const auto dir = ctx.cache / "a6";
  const calibrate::CalibrationSettings settings;
  const bool hit = cached(dir, {{"settings", settings}, {"model", fingerprint(read_json(dm.checkpoint.parent_path() /
                                                                                          "cache_key.json"))}},
                          ctx.rebuild, [&] {
                            json rows = json::array();
                            for (std::size_t i = 0; i < problems.size(); ++i) {
                              problems[i].settings = settings;
                              const auto r = calibrate::calibrate_gradient(*model, problems[i], ctx.seed + i);
                              calibrate::write_result(dir / ("problem" + std::to_string(i)), r, problems[i]);
                              double err = 0;
                              for (int k = 0; k < 5; ++k)
                                err = std::max(err, std::abs(r.theta_norm[k] - (*problems[i].theta_true)[k]));
                              rows.push_back({{"error", err}, {"seconds", r.wall_time_s}, {"loss", r.best_loss}});
                              std::cout << fmt("    problem %zu: |theta - theta*|inf %.4f, loss %.2e, %.0f s", i, err,
                                               r.best_loss, r.wall_time_s)
                                        << std::endl;
                            }
                            write_json(dir / "summary.json", rows);
                          });
  const auto rows = read_json(dir / "summary.json");
  int ok = 0;
  double slowest = 0;
  std::string errs;
  for (const auto& r : rows) {
    ok += r.at("error").get<double>() <= 0.05;
    slowest = std::max(slowest, r.at("seconds").get<double>());
    errs += fmt(" %.3f", r.at("error").get<double>());
  }
  return {ok >= 8 && slowest < 600.0, fmt("%d/10 within 0.05 (need 8), errors:%s; slowest solve %.0f s%s", ok,
                                          errs.c_str(), slowest, hit ? " (cached)" : "")};
}

// Equal budget of forward passes: `starts` chains of budget/starts evaluations.
constexpr int kBudget = 300;
constexpr int kA7Starts = 2;

Outcome a7_beats_random(const Context& ctx, const DeskModel& dm) {
  auto model = models::load_model(dm.checkpoint);
  auto problems = self_problems(*model, dm.data, 10);
  const auto dir = ctx.cache / "a7";
  calibrate::CalibrationSettings settings;
  settings.starts = kA7Starts;
  settings.iterations = kBudget / kA7Starts - 1;
  const bool hit = cached(
      dir, {{"settings", settings}, {"budget", kBudget},
            {"model", fingerprint(read_json(dm.checkpoint.parent_path() / "cache_key.json"))}},
      ctx.rebuild, [&] {
        json rows = json::array();
        for (std::size_t i = 0; i < problems.size(); ++i) {
          problems[i].settings = settings;
          const auto g = calibrate::calibrate_gradient(*model, problems[i], ctx.seed + 100 + i);
          const auto r = calibrate::random_search_baseline(*model, problems[i], kBudget, ctx.seed + 100 + i);
          rows.push_back({{"gradient", g.best_loss},
                          {"gradient_passes", g.forward_passes},
                          {"random", r.best_loss},
                          {"random_passes", r.forward_passes}});
          std::cout << fmt("    problem %zu: gradient %.3e, random %.3e", i, g.best_loss, r.best_loss) << std::endl;
        }
        write_json(dir / "summary.json", rows);
      });
  const auto rows = read_json(dir / "summary.json");
  std::vector<double> g, r;
  bool budget_ok = true;
  for (const auto& row : rows) {
    g.push_back(row.at("gradient"));
    r.push_back(row.at("random"));
    budget_ok = budget_ok && row.at("gradient_passes") == kBudget && row.at("random_passes") == kBudget;
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  const double mg = median(g), mr = median(r);
  return {budget_ok && mg < mr, fmt("median final loss: gradient %.3e vs random search %.3e at %d forward passes%s",
                                    mg, mr, kBudget, hit ? " (cached)" : "")};
}

// ---------------------------------------------------------------- eval

Outcome a8_protocol(const Context& ctx) {
  const auto m = desk_subset(ctx, "a8_data", 2, 1, 5, 8);
  eval::EvalOptions opts;
  opts.split = dataset::Split::test;
  const auto rep = eval::evaluate(eval::Predictor::solver(), m, opts);
  bool curve = true;
  for (const auto& s : rep.samples)
    for (const auto& d : s.dice) curve = curve && (!d || *d == 1.0);
  const bool self = rep.mse.mean == 0.0 && rep.mae.mean == 0.0 && rep.ssim.mean == 1.0 && curve &&
                    rep.size() == m.split(dataset::Split::test).size();

  // Hand-computed fixture: mse {1/4, 1/4, 1} has mean 1/2 and sample variance
  // 3/16, so stderr = sqrt(3/16 / 3) = 1/4. Dice {1, undefined, 1/2}: mean 3/4
  // over n = 2 with one undefined, variance 1/8, stderr = sqrt(1/16) = 1/4.
  std::vector<eval::SampleMetrics> fx(3);
  const double mses[3] = {0.25, 0.25, 1.0};
  const std::optional<double> dices[3] = {1.0, std::nullopt, 0.5};
  for (int i = 0; i < 3; ++i) {
    fx[i].id = "f" + std::to_string(i);
    fx[i].mse = mses[i];
    fx[i].mae = mses[i];
    fx[i].ssim = 1.0;
    fx[i].dice = {dices[i]};
  }
  const auto fr = eval::make_report(fx, {0.5});
  const bool fixture = fr.mse.mean == 0.5 && fr.mse.stderr_ == 0.25 && fr.mse.n == 3 && fr.dice[0].mean == 0.75 &&
                       fr.dice[0].stderr_ == 0.25 && fr.dice[0].n == 2 && fr.dice[0].n_undefined == 1 &&
                       fr.ssim.stderr_ == 0.0;
  eval::write_summary_csv(ctx.cache / "a8_fixture_summary.csv", fr);
  std::ifstream f(ctx.cache / "a8_fixture_summary.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  const bool csv = row == "mse,0.5,0.25,3,0";
  return {self && fixture && csv,
          fmt("solver self-eval on %zu samples: mse %.17g, mae %.17g, ssim %.17g, dice curve %s; 3-sample fixture %s, csv row "
              "'%s'",
              rep.size(), rep.mse.mean, rep.mae.mean, rep.ssim.mean, curve ? "all 1" : "NOT 1",
              fixture ? "exact" : "MISMATCH", row.c_str())};
}

// ---------------------------------------------------------------- cli

Outcome a9_determinism(const Context& ctx) {
  const auto root = ctx.cache / "a9";
  fs::remove_all(root);
  fs::create_directories(root);
  auto write = [&](const std::string& name, const json& j) {
    write_json(root / name, j);
    return (root / name).string();
  };
  const auto ds_cfg = write("dataset.json", {{"counts", {{"train", 4}, {"val", 1}, {"test", 2}}}});
  std::vector<std::string> notes;
  bool pass = true;
  for (const std::string run : {"run_a", "run_b"}) {
    const auto base = root / run;
    const auto data = (base / "dataset").string();
    const auto train_cfg = write(run + "_train.json", {{"data", data},
                                                       {"training", {{"max_steps", 10}, {"batch_size", 2},
                                                                     {"epochs", 5}}}});
    const auto eval_cfg = write(run + "_eval.json", {{"data", data},
                                                     {"checkpoint", (base / "train" / "last.ckpt").string()}});
    const auto cal_cfg = write(run + "_cal.json",
                               {{"checkpoint", (base / "train" / "last.ckpt").string()},
                                {"settings", {{"starts", 2}, {"iterations", 3}}},
                                {"problem", {{"data", data}, {"sample", "s00005"}}}});
    const std::vector<std::vector<std::string>> cmds{
        {"dataset", "--config", ds_cfg, "--out", data},
        {"train", "--config", train_cfg, "--out", (base / "train").string()},
        {"eval", "--config", eval_cfg, "--out", (base / "eval").string()},
        {"calibrate", "--config", cal_cfg, "--out", (base / "calibrate").string()}};
    for (auto args : cmds) {
      args.insert(args.end(), {"--seed", "17", "--threads", "1"});
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) {
        pass = false;
        notes.push_back(args[0] + " exited " + std::to_string(code) + ": " + err.str());
      }
    }
  }
  // resolved configs name their own run's paths, so compare them with the run
  // directory name factored out; timing.json holds wall time only.
  for (const std::string stage : {"dataset", "train", "eval", "calibrate"}) {
    const auto a = read_tree(root / "run_a" / stage, {"timing.json", "resolved_config.json"});
    const auto b = read_tree(root / "run_b" / stage, {"timing.json", "resolved_config.json"});
    const bool same = !a.empty() && a == b;
    pass = pass && same;
    notes.push_back(stage + (same ? " identical (" + std::to_string(a.size()) + " files)" : " DIFFERS"));
  }
  std::string joined;
  for (const auto& n : notes) joined += (joined.empty() ? "" : "; ") + n;
  return {pass, joined};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria A1..A9"};
  Context ctx;
  std::string cache = TUMORNET_ACCEPTANCE_CACHE;
  std::vector<std::string> only, known;
  app.add_option("--cache", cache, "artifact cache directory");
  app.add_option("--only", only, "subset of criteria, e.g. A1 A4")->delimiter(',');
  app.add_flag("--rebuild", ctx.rebuild, "ignore cached artifacts");
  app.add_option("--known-failure", known, "criteria whose FAIL does not change the exit status")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.cache = cache;
  fs::create_directories(ctx.cache);

  auto want = [&](const std::string& id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  std::optional<DeskModel> dm;
  auto desk = [&]() -> const DeskModel& {
    if (!dm) dm = desk_model(ctx);
    return *dm;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", [] { return a1_logistic(); }},
      {"A2", [] { return a2_conservation(); }},
      {"A3", [] { return a3_gradcheck(); }},
      {"A4", [&] { return a4_overfit(ctx); }},
      {"A5", [&] { return a5_generalization(ctx, desk()); }},
      {"A6", [&] { return a6_self_consistency(ctx, desk()); }},
      {"A7", [&] { return a7_beats_random(ctx, desk()); }},
      {"A8", [&] { return a8_protocol(ctx); }},
      {"A9", [&] { return a9_determinism(ctx); }},
  };
  int failed = 0, run = 0, tolerated = 0;
  std::ofstream report(ctx.cache / "acceptance_report.txt");
  for (const auto& [id, fn] : criteria) {
    if (!want(id)) continue;
    ++run;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const bool is_known = std::find(known.begin(), known.end(), id) != known.end();
    if (!o.pass) ++(is_known ? tolerated : failed);
    const std::string line =
        id + (o.pass ? " PASS  " : " FAIL  ") + o.detail + (!o.pass && is_known ? " [known failure]" : "");
    std::cout << line << std::endl;
    report << line << '\n';
  }
  std::string total = std::to_string(run - failed - tolerated) + "/" + std::to_string(run) + " criteria passed";
  if (tolerated) total += ", " + std::to_string(tolerated) + " known failure(s)";
  std::cout << total << std::endl;
  report << total << '\n';
  return failed ? 1 : 0;
}
