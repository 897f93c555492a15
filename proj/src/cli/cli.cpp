#include "tumornet/cli/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "tumornet/calibrate/calibrate.hpp"
#include "tumornet/core/json.hpp"
#include "tumornet/dataset/generate.hpp"
#include "tumornet/dataset/phantom.hpp"
#include "tumornet/dataset/sampling.hpp"
#include "tumornet/eval/report.hpp"
#include "tumornet/field/volume_io.hpp"
#include "tumornet/models/gradcheck_cases.hpp"
#include "tumornet/models/train.hpp"
#include "tumornet/pde/solver.hpp"

namespace tumornet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config:
      return exit_config;
    case ErrorCategory::data:
      return exit_data;
    case ErrorCategory::numerical:
      return exit_numerical;
    default:
      return exit_other;
  }
}

namespace {

const std::vector<std::string> kCommands{"phantom", "simulate", "dataset",   "train",   "eval",
                                         "dice-curve", "calibrate", "gradcheck", "selftest"};
const std::map<std::string, std::string> kDescriptions{
    {"phantom", "procedural tissue phantom (tissue.vol)"},
    {"simulate", "reaction-diffusion run on a phantom or tissue file"},
    {"dataset", "generate a train/val/test dataset with manifest"},
    {"train", "train a surrogate on a dataset"},
    {"eval", "score a checkpoint or the solver on a dataset split"},
    {"dice-curve", "dice over thresholds only (dice_curve.csv)"},
    {"calibrate", "recover growth parameters from an observation"},
    {"gradcheck", "finite-difference check of every layer and architecture"},
    {"selftest", "fast closed-form checks of every module"}};
const std::vector<std::string> kCommonKeys{"command", "seed", "threads", "preset"};

Error config_error(const std::string& msg) { return Error(ErrorCode::config, msg); }

struct DatasetPreset {
  dataset::PhantomSpec phantom;
  std::size_t train = 0, val = 0, test = 0;
  field::Dims work{}, out{};
};

DatasetPreset dataset_preset(models::Preset p) {
  DatasetPreset d;
  if (p == models::Preset::desk) {
    d.phantom.dims = {64, 64, 64};
    d.train = 512, d.val = 64, d.test = 64;
    d.work = {56, 56, 56};
    d.out = {32, 32, 32};
  } else {
    d.phantom.dims = {128, 128, 128};
    d.train = 10000, d.val = 2000, d.test = 2000;
    d.work = {120, 120, 120};
    d.out = {64, 64, 64};
  }
  return d;
}

// Preset default overlaid with the file's block, parsed strictly and written
// back out in full.
template <typename T>
json layer(const json& file, const std::string& key, const T& def) {
  json base = def;
  if (file.contains(key)) {
    if (!file.at(key).is_object()) throw config_error("'" + key + "' must be an object");
    base.merge_patch(file.at(key));
  }
  return json(base.get<T>());
}

template <typename T>
T value_or(const json& file, const std::string& key, T def) {
  read_optional(file, key, def, "config");
  return def;
}

std::string abs_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

std::string required_path(const json& file, const std::string& key, const std::string& where = "config") {
  if (!file.contains(key) || !file.at(key).is_string()) {
    throw config_error(where + " needs '" + key + "' (a path)");
  }
  return abs_path(file.at(key).get<std::string>());
}

json resolve_eval(const json& f, bool curve_only) {
  std::vector<std::string> keys{"data", "predictor", "checkpoint", "split", "thresholds", "batch_size", "limit"};
  keys.insert(keys.end(), kCommonKeys.begin(), kCommonKeys.end());
  reject_unknown(f, keys, curve_only ? "dice-curve config" : "eval config");
  json r;
  r["data"] = required_path(f, "data");
  const auto predictor = value_or<std::string>(f, "predictor", f.contains("checkpoint") ? "checkpoint" : "solver");
  if (predictor != "solver" && predictor != "checkpoint") {
    throw config_error("predictor must be \"solver\" or \"checkpoint\", got \"" + predictor + "\"");
  }
  r["predictor"] = predictor;
  r["checkpoint"] = predictor == "checkpoint" ? json(required_path(f, "checkpoint")) : json(nullptr);
  r["split"] = dataset::to_string(dataset::split_from_string(value_or<std::string>(f, "split", "test")));
  const auto th = value_or(f, "thresholds", eval::default_thresholds());
  for (double t : th) {
    if (!(t > 0 && t <= 1)) throw config_error("thresholds must lie in (0, 1]");
  }
  r["thresholds"] = th;
  const int bs = value_or(f, "batch_size", 4);
  if (bs < 1) throw config_error("batch_size must be >= 1");
  r["batch_size"] = bs;
  r["limit"] = value_or<std::size_t>(f, "limit", 0);
  return r;
}

json resolve_problem(const json& f) {
  if (!f.is_object()) throw config_error("'problem' must be an object");
  json r;
  if (f.contains("data")) {
    reject_unknown(f, {"data", "sample", "observe", "outline_taus"}, "problem");
    r["data"] = required_path(f, "data", "problem");
    if (!f.contains("sample") || !f.at("sample").is_string()) throw config_error("problem needs 'sample' (an id)");
    r["sample"] = f.at("sample");
    const auto obs = value_or<std::string>(f, "observe", "target");
    if (obs != "target" && obs != "surrogate") throw config_error("problem.observe must be \"target\" or \"surrogate\"");
    r["observe"] = obs;
    r["outline_taus"] = value_or(f, "outline_taus", std::vector<double>{0.25, 0.5});
    return r;
  }
  reject_unknown(f, {"tissue", "observation", "outlines", "ranges", "theta_true"}, "problem");
  r["tissue"] = required_path(f, "tissue", "problem");
  r["observation"] = f.contains("observation") ? json(required_path(f, "observation", "problem")) : json(nullptr);
  json outlines = json::array();
  if (f.contains("outlines")) {
    for (const auto& o : f.at("outlines")) {
      reject_unknown(o, {"mask", "tau"}, "problem.outlines[]");
      outlines.push_back({{"mask", required_path(o, "mask", "problem.outlines[]")}, {"tau", value_or(o, "tau", 0.25)}});
    }
  }
  r["outlines"] = outlines;
  r["ranges"] = layer(f, "ranges", field::ParamRanges{});
  r["theta_true"] = f.contains("theta_true") ? f.at("theta_true") : json(nullptr);
  return r;
}

}  // namespace

json resolve_config(const std::string& command, const json& file_in, const json& flags) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    throw config_error("unknown command '" + command + "'");
  }
  const json file = file_in.is_null() ? json::object() : file_in;
  if (!file.is_object()) throw config_error("config must be a JSON object");
  if (file.contains("command") && file.at("command") != command) {
    throw config_error("config was written for '" + file.at("command").dump() + "', not '" + command + "'");
  }
  json r;
  r["command"] = command;
  r["seed"] = flags.contains("seed") ? flags.at("seed").get<std::uint64_t>() : value_or<std::uint64_t>(file, "seed", 0);
  r["threads"] = flags.contains("threads") ? flags.at("threads").get<int>() : value_or(file, "threads", 0);
  if (r["threads"].get<int>() < 0) throw config_error("threads must be >= 0");
  const auto preset = models::preset_from_string(
      flags.contains("preset") ? flags.at("preset").get<std::string>() : value_or<std::string>(file, "preset", "desk"));
  r["preset"] = models::to_string(preset);
  const auto ds = dataset_preset(preset);

  auto keys = [&](std::vector<std::string> k) {
    k.insert(k.end(), kCommonKeys.begin(), kCommonKeys.end());
    reject_unknown(file, k, command + " config");
  };

  if (command == "phantom") {
    keys({"phantom"});
    r["phantom"] = layer(file, "phantom", ds.phantom);
  } else if (command == "simulate") {
    keys({"phantom", "tissue", "params", "ranges", "simulation"});
    r["tissue"] = file.contains("tissue") ? json(required_path(file, "tissue")) : json(nullptr);
    r["phantom"] = layer(file, "phantom", ds.phantom);
    r["ranges"] = layer(file, "ranges", field::ParamRanges{});
    if (file.contains("params")) {
      auto p = file.at("params").get<field::GrowthParams>();
      p.validate();
      r["params"] = p;
    } else {
      r["params"] = nullptr;
    }
    r["simulation"] = layer(file, "simulation", pde::SimulationConfig{});
  } else if (command == "dataset") {
    keys({"phantom", "ranges", "simulation", "counts", "work_dims", "out_dims", "name"});
    r["phantom"] = layer(file, "phantom", ds.phantom);
    r["ranges"] = layer(file, "ranges", field::ParamRanges{});
    r["simulation"] = layer(file, "simulation", pde::SimulationConfig{});
    json counts = {{"train", ds.train}, {"val", ds.val}, {"test", ds.test}};
    if (file.contains("counts")) {
      reject_unknown(file.at("counts"), {"train", "val", "test"}, "counts");
      counts.merge_patch(file.at("counts"));
    }
    for (const char* k : {"train", "val", "test"}) {
      if (!counts.at(k).is_number_unsigned()) throw config_error(std::string("counts.") + k + " must be >= 0");
    }
    r["counts"] = counts;
    r["work_dims"] = value_or(file, "work_dims", ds.work);
    r["out_dims"] = value_or(file, "out_dims", ds.out);
    r["name"] = value_or<std::string>(file, "name", "dataset");
  } else if (command == "train") {
    keys({"data", "arch", "baseline", "training"});
    r["data"] = required_path(file, "data");
    const auto arch = models::arch_from_string(value_or<std::string>(file, "arch", "tumorsurrogate"));
    const bool baseline = value_or(file, "baseline", false);
    if (baseline && arch != models::Arch::tumorsurrogate) throw config_error("baseline applies to tumorsurrogate only");
    r["arch"] = models::to_string(arch);
    r["baseline"] = baseline;
    auto def = models::preset_training(arch, preset, baseline);
    def.seed = r["seed"].get<std::uint64_t>();
    if (file.contains("training") && file.at("training").contains("seed") &&
        file.at("training").at("seed") != r["seed"]) {
      throw config_error("training.seed must equal the run seed; set the seed with --seed");
    }
    json t = layer(file, "training", def);
    t.get<models::TrainConfig>().check();
    r["training"] = t;
  } else if (command == "eval" || command == "dice-curve") {
    r.update(resolve_eval(file, command == "dice-curve"));
  } else if (command == "calibrate") {
    keys({"checkpoint", "method", "budget", "settings", "problem"});
    r["checkpoint"] = required_path(file, "checkpoint");
    const auto method = value_or<std::string>(file, "method", "gradient");
    if (method != "gradient" && method != "random_search") {
      throw config_error("method must be \"gradient\" or \"random_search\"");
    }
    r["method"] = method;
    const auto budget = value_or<std::int64_t>(file, "budget", 300);
    if (budget < 1) throw config_error("budget must be >= 1");
    r["budget"] = budget;
    r["settings"] = layer(file, "settings", calibrate::CalibrationSettings{});
    if (!file.contains("problem")) throw config_error("calibrate config needs a 'problem' block");
    r["problem"] = resolve_problem(file.at("problem"));
  } else if (command == "gradcheck") {
    keys({"cases", "tol"});
    r["cases"] = value_or(file, "cases", std::vector<std::string>{});
    r["tol"] = value_or(file, "tol", 1e-3);
  } else {
    keys({});
  }
  return r;
}

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot read config " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

field::TissueMap phantom_for(const json& r) {
  return dataset::gen_phantom(r.at("phantom").get<dataset::PhantomSpec>(), r.at("seed").get<std::uint64_t>());
}

void cmd_phantom(const json& r, const fs::path& out, std::ostream& os) {
  const auto t = phantom_for(r);
  field::save_tissue(out / "tissue.vol", t);
  json info = {{"dims", t.dims()}, {"white_matter_components", dataset::white_matter_components(t)}};
  for (int c = 0; c < 3; ++c) info["mean_" + field::TissueMap::channel_names[c]] = t.channel(c).array().mean();
  write_json(out / "phantom.json", info);
  os << "phantom " << field::to_string(t.dims()) << " -> " << (out / "tissue.vol").string() << '\n';
}

void cmd_simulate(const json& r, const fs::path& out, std::ostream& os) {
  const auto seed = r.at("seed").get<std::uint64_t>();
  field::TissueMap t;
  if (r.at("tissue").is_null()) {
    t = phantom_for(r);
    field::save_tissue(out / "tissue.vol", t);
  } else {
    t = field::load_tissue(r.at("tissue").get<std::string>());
  }
  const auto ranges = r.at("ranges").get<field::ParamRanges>();
  const auto p = r.at("params").is_null() ? dataset::sample_params(ranges, t, derive_seed(seed, 1, 0))
                                          : r.at("params").get<field::GrowthParams>();
  const auto cfg = r.at("simulation").get<pde::SimulationConfig>();
  const auto res = pde::simulate(t, p, cfg);
  const auto final_f = res.final_state.cast<float>();
  field::save_volume(out / "tumor.vol", final_f, "tumor");
  for (const auto& [step, v] : res.snapshots) {
    char name[48];
    std::snprintf(name, sizeof name, "snapshot_%06d.vol", step);
    field::save_volume(out / name, v.cast<float>(), "tumor");
  }
  write_json(out / "simulation.json", {{"params", p},
                                       {"params_norm", field::normalize_params(p, ranges)},
                                       {"steps", res.steps},
                                       {"dt", res.dt},
                                       {"mass", res.final_state.array().sum()},
                                       {"max", res.final_state.array().maxCoeff()}});
  os << "simulated " << res.steps << " steps (dt " << res.dt << ") -> " << (out / "tumor.vol").string() << '\n';
}

void cmd_dataset(const json& r, const fs::path& out, std::ostream& os) {
  dataset::GenerateOptions opts;
  opts.name = r.at("name");
  opts.work_dims = r.at("work_dims");
  opts.out_dims = r.at("out_dims");
  opts.verbose = true;
  const auto& c = r.at("counts");
  const auto m = dataset::generate_dataset(c.at("train"), c.at("val"), c.at("test"),
                                           r.at("phantom").get<dataset::PhantomSpec>(),
                                           r.at("ranges").get<field::ParamRanges>(),
                                           r.at("simulation").get<pde::SimulationConfig>(), r.at("seed"), out, opts);
  os << "dataset " << m.samples.size() << " samples (" << m.failures.size() << " rejected attempts) -> "
     << out.string() << '\n';
}

void cmd_train(const json& r, const fs::path& out, std::ostream& os) {
  const auto cfg = r.at("training").get<models::TrainConfig>();
  const auto m = dataset::load_manifest(r.at("data").get<std::string>());
  const auto res = models::train(cfg, m, out, [&](const models::EpochLog& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %4d  lr %.3e  train_mse %.6e  val_mse %.6e\n", e.epoch, e.lr, e.train_mse,
                  e.val_mse);
    os << buf << std::flush;
  });
  write_json(out / "train_summary.json", {{"steps", res.steps},
                                          {"epochs", res.log.size()},
                                          {"best_epoch", res.best_epoch},
                                          {"best_metric", res.best_metric},
                                          {"parameters", models::build_model<float>(cfg.model, 0)->parameter_count()}});
  os << "trained " << res.steps << " steps; best epoch " << res.best_epoch << " -> " << out.string() << '\n';
}

void print_summary(std::ostream& os, const eval::MetricReport& rep, bool curve_only) {
  char buf[160];
  auto row = [&](const std::string& name, const eval::Aggregate& a) {
    std::snprintf(buf, sizeof buf, "%-10s %.6e +- %.2e  (n %zu, undefined %zu)\n", name.c_str(), a.mean, a.stderr_,
                  a.n, a.n_undefined);
    os << buf;
  };
  if (!curve_only) {
    row("mse", rep.mse);
    row("mae", rep.mae);
    row("ssim", rep.ssim);
  }
  for (std::size_t t = 0; t < rep.thresholds.size(); ++t) row(eval::dice_label(rep.thresholds[t]), rep.dice[t]);
}

void cmd_eval(const json& r, const fs::path& out, std::ostream& os, bool curve_only) {
  const auto m = dataset::load_manifest(r.at("data").get<std::string>());
  eval::EvalOptions opts;
  opts.split = dataset::split_from_string(r.at("split"));
  opts.thresholds = r.at("thresholds").get<std::vector<double>>();
  opts.batch_size = r.at("batch_size");
  opts.limit = r.at("limit");
  const auto pred = r.at("predictor") == "solver" ? eval::Predictor::solver()
                                                  : eval::Predictor::from_checkpoint(r.at("checkpoint").get<std::string>());
  const auto rep = eval::evaluate(pred, m, opts);
  if (curve_only) {
    eval::write_dice_curve_csv(out / "dice_curve.csv", rep);
  } else {
    eval::write_report(out, rep);
  }
  os << pred.describe() << " on " << dataset::to_string(opts.split) << " (" << rep.size() << " samples)\n";
  print_summary(os, rep, curve_only);
}

calibrate::CalibrationProblem load_problem(const json& r, models::ConditionedModel<float>& model) {
  const auto& pj = r.at("problem");
  calibrate::CalibrationProblem p;
  p.settings = r.at("settings").get<calibrate::CalibrationSettings>();
  if (pj.contains("data")) {
    const auto m = dataset::load_manifest(pj.at("data").get<std::string>());
    const auto& rec = m.find(pj.at("sample").get<std::string>());
    auto s = dataset::load_sample(m, rec);
    p.tissue = std::move(s.tissue);
    p.ranges = m.ranges;
    p.theta_true = rec.theta_norm;
    auto obs = pj.at("observe") == "surrogate" ? calibrate::predict_volume(model, p.tissue, rec.theta_norm)
                                               : std::move(s.target);
    if (p.settings.mode == calibrate::LossMode::mse_field) {
      p.observation = std::move(obs);
    } else {
      for (double tau : pj.at("outline_taus").get<std::vector<double>>()) {
        calibrate::Outline o;
        o.tau = tau;
        o.mask = field::Volume3f(obs.dims());
        o.mask.array() = (obs.array() >= static_cast<float>(tau)).cast<float>();
        p.outlines.push_back(std::move(o));
      }
    }
  } else {
    p.tissue = field::load_tissue(pj.at("tissue").get<std::string>());
    p.ranges = pj.at("ranges").get<field::ParamRanges>();
    if (!pj.at("observation").is_null()) p.observation = field::load_volume(pj.at("observation").get<std::string>());
    for (const auto& o : pj.at("outlines")) {
      p.outlines.push_back({field::load_volume(o.at("mask").get<std::string>()), o.at("tau").get<double>()});
    }
    if (!pj.at("theta_true").is_null()) p.theta_true = pj.at("theta_true").get<field::NormalizedParams>();
  }
  return p;
}

void cmd_calibrate(const json& r, const fs::path& out, std::ostream& os) {
  auto model = models::load_model(r.at("checkpoint").get<std::string>());
  const auto p = load_problem(r, *model);
  const auto seed = r.at("seed").get<std::uint64_t>();
  const auto res = r.at("method") == "gradient" ? calibrate::calibrate_gradient(*model, p, seed)
                                                : calibrate::random_search_baseline(*model, p, r.at("budget"), seed);
  calibrate::write_result(out, res, p);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: best loss %.6e (start %d), %lld forward passes, %.1f s\n", res.method.c_str(),
                res.best_loss, res.best_start, static_cast<long long>(res.forward_passes), res.wall_time_s);
  os << buf;
  os << "theta_norm " << json(res.theta_norm).dump() << "\ntheta_raw  " << json(res.theta_raw).dump() << '\n';
}

int cmd_gradcheck(const json& r, const std::optional<fs::path>& out, std::ostream& os) {
  nn::GradcheckOptions opts;
  opts.tol = r.at("tol");
  const auto filters = r.at("cases").get<std::vector<std::string>>();
  std::ostringstream csv;
  csv << "case,max_rel_error,checked,pass\n";
  int failed = 0, run = 0;
  char buf[200];
  for (const auto& c : models::all_gradcheck_cases()) {
    if (!filters.empty() && std::none_of(filters.begin(), filters.end(),
                                         [&](const std::string& f) { return c.name.find(f) != std::string::npos; })) {
      continue;
    }
    const auto res = c.run(opts);
    const bool ok = res.max_rel_error <= opts.tol;
    failed += !ok;
    ++run;
    std::snprintf(buf, sizeof buf, "%-36s %10.3e %6d  %s\n", c.name.c_str(), res.max_rel_error, res.checked,
                  ok ? "ok" : "FAIL");
    os << buf;
    if (!ok) os << "    worst: " << res.worst << '\n';
    std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%d\n", c.name.c_str(), res.max_rel_error, res.checked, ok ? 1 : 0);
    csv << buf;
  }
  if (run == 0) throw config_error("no gradcheck case matches the 'cases' filter");
  if (out) {
    std::ofstream f(*out / "gradcheck.csv");
    f << csv.str();
  }
  os << run - failed << "/" << run << " cases within " << opts.tol << '\n';
  return failed ? exit_numerical : exit_ok;
}

int cmd_selftest(const std::optional<fs::path>& out, std::ostream& os) {
  const auto checks = run_selftest();
  int failed = 0;
  std::ostringstream csv;
  csv << "module,check,pass,detail\n";
  for (const auto& c : checks) {
    failed += !c.pass;
    os << (c.pass ? "PASS " : "FAIL ") << c.module << ": " << c.name;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << '\n';
    csv << c.module << ",\"" << c.name << "\"," << (c.pass ? 1 : 0) << ",\"" << c.detail << "\"\n";
  }
  if (out) {
    std::ofstream f(*out / "selftest.csv");
    f << csv.str();
  }
  os << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  return failed ? exit_other : exit_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tumor growth surrogates: phantoms, simulation, datasets, training, evaluation, calibration"};
  app.require_subcommand(1);
  std::string config_path, preset, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads; 1 selects the deterministic profile")->check(
        CLI::NonNegativeNumber);
    sub->add_option("--preset", preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }
  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    json flags = json::object();
    if (sub->count("--seed")) flags["seed"] = seed;
    if (sub->count("--threads")) flags["threads"] = threads;
    if (sub->count("--preset")) flags["preset"] = preset;
    json resolved;
    try {
      resolved = resolve_config(command, config_path.empty() ? json(nullptr) : read_json(config_path), flags);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::config || config_path.empty()) throw;
      throw config_error(config_path + ": " + e.what());
    } catch (const json::exception& e) {
      throw config_error((config_path.empty() ? std::string("flags") : config_path) + ": " + e.what());
    }
    if (const int n = resolved.at("threads"); n > 0) {
      omp_set_num_threads(n);
      Eigen::setNbThreads(n);
    }
    std::optional<fs::path> out_path;
    if (!out_dir.empty()) {
      out_path = fs::path(out_dir);
      fs::create_directories(*out_path);
      write_json(*out_path / "resolved_config.json", resolved);
    } else if (command != "gradcheck" && command != "selftest") {
      throw config_error(command + " writes files; pass --out <dir>");
    }
    if (command == "phantom") cmd_phantom(resolved, *out_path, out);
    else if (command == "simulate") cmd_simulate(resolved, *out_path, out);
    else if (command == "dataset") cmd_dataset(resolved, *out_path, out);
    else if (command == "train") cmd_train(resolved, *out_path, out);
    else if (command == "eval") cmd_eval(resolved, *out_path, out, false);
    else if (command == "dice-curve") cmd_eval(resolved, *out_path, out, true);
    else if (command == "calibrate") cmd_calibrate(resolved, *out_path, out);
    else if (command == "gradcheck") return cmd_gradcheck(resolved, out_path, out);
    else return cmd_selftest(out_path, out);
    return exit_ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(category_of(e.code()));
  } catch (const json::exception& e) {
    err << "error: malformed JSON value: " << e.what() << '\n';
    return exit_config;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_other;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tumornet::cli
