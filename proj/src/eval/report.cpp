#include "tumornet/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tumornet/dataset/generate.hpp"
#include "tumornet/models/train.hpp"

namespace tumornet::eval {

namespace fs = std::filesystem;

namespace {

// Shortest round-trip form, so CSVs are exact and stable across runs.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
  return f;
}

void summary_row(std::ostream& os, const std::string& name, const Aggregate& a) {
  os << name << ',' << num(a.mean) << ',' << num(a.stderr_) << ',' << a.n << ',' << a.n_undefined << '\n';
}

nlohmann::json agg_json(const Aggregate& a) {
  return {{"mean", std::isnan(a.mean) ? nlohmann::json(nullptr) : nlohmann::json(a.mean)},
          {"stderr", a.stderr_},
          {"n", a.n},
          {"n_undefined", a.n_undefined},
          {"degenerate", a.degenerate}};
}

}  // namespace

SampleMetrics score_sample(const std::string& id, const field::Volume3f& pred, const field::Volume3f& target,
                           const std::vector<double>& thresholds) {
  SampleMetrics s;
  s.id = id;
  s.mse = mse(pred, target);
  s.mae = mae(pred, target);
  s.ssim = ssim3d(pred, target);
  s.dice = dice_curve(pred, target, std::span<const double>(thresholds));
  return s;
}

void MetricReport::aggregate_all() {
  std::vector<double> a, b, c;
  for (const auto& s : samples) {
    a.push_back(s.mse);
    b.push_back(s.mae);
    c.push_back(s.ssim);
  }
  mse = aggregate(a);
  mae = aggregate(b);
  ssim = aggregate(c);
  dice.clear();
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::vector<std::optional<double>> d;
    for (const auto& s : samples) d.push_back(s.dice.at(t));
    dice.push_back(aggregate(d));
  }
}

MetricReport make_report(std::vector<SampleMetrics> samples, std::vector<double> thresholds) {
  MetricReport r;
  r.samples = std::move(samples);
  r.thresholds = std::move(thresholds);
  r.aggregate_all();
  return r;
}

std::string dice_label(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dice@%.2f", tau);
  return buf;
}

void write_per_sample_csv(const fs::path& path, const MetricReport& r) {
  auto f = open_out(path);
  f << "id,mse,mae,ssim";
  for (double t : r.thresholds) f << ',' << dice_label(t);
  f << '\n';
  for (const auto& s : r.samples) {
    f << s.id << ',' << num(s.mse) << ',' << num(s.mae) << ',' << num(s.ssim);
    for (const auto& d : s.dice) f << ',' << (d ? num(*d) : "nan");
    f << '\n';
  }
}

void write_summary_csv(const fs::path& path, const MetricReport& r) {
  auto f = open_out(path);
  f << "metric,mean,stderr,n,n_undefined\n";
  summary_row(f, "mse", r.mse);
  summary_row(f, "mae", r.mae);
  summary_row(f, "ssim", r.ssim);
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) summary_row(f, dice_label(r.thresholds[t]), r.dice[t]);
}

void write_dice_curve_csv(const fs::path& path, const MetricReport& r) {
  auto f = open_out(path);
  f << "threshold,mean,stderr,n,n_undefined\n";
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", r.thresholds[t]);
    summary_row(f, buf, r.dice[t]);
  }
}

nlohmann::json summary_json(const MetricReport& r) {
  nlohmann::json dice = nlohmann::json::array();
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    auto a = agg_json(r.dice[t]);
    a["threshold"] = r.thresholds[t];
    dice.push_back(a);
  }
  return {{"n_samples", r.samples.size()},
          {"mse", agg_json(r.mse)},
          {"mae", agg_json(r.mae)},
          {"ssim", agg_json(r.ssim)},
          {"dice", dice}};
}

std::string Predictor::describe() const {
  return kind == Kind::solver ? "solver" : "checkpoint:" + checkpoint.string();
}

MetricReport evaluate(const Predictor& p, const dataset::Manifest& m, const EvalOptions& opts) {
  auto records = m.split(opts.split);
  if (opts.limit > 0 && records.size() > opts.limit) records.resize(opts.limit);
  if (records.empty()) {
    throw Error(ErrorCode::missing_data, "split '" + dataset::to_string(opts.split) + "' of " + m.root.string() +
                                             " is empty");
  }
  std::vector<SampleMetrics> scored;
  scored.reserve(records.size());
  if (p.kind == Predictor::Kind::solver) {
    for (const auto* r : records) {
      const auto stored = dataset::load_sample(m, *r);
      const auto g = dataset::generate_sample(m.phantom, m.ranges, m.simulation, r->phantom_seed, r->param_seed,
                                              m.work_dims, m.out_dims);
      scored.push_back(score_sample(r->id, g.pre.tumor, stored.target, opts.thresholds));
    }
  } else {
    auto model = models::load_model(p.checkpoint);
    const auto split = models::load_split(m, opts.split, opts.limit);
    if (split.samples.front().n != model->input()) {
      throw Error(ErrorCode::config, "checkpoint " + p.checkpoint.string() + " expects input " +
                                         std::to_string(model->input()) + ", dataset has " +
                                         std::to_string(split.samples.front().n));
    }
    for (std::size_t i = 0; i < split.size(); i += opts.batch_size) {
      const std::size_t e = std::min(split.size(), i + static_cast<std::size_t>(opts.batch_size));
      std::vector<const models::MemorySample*> members;
      for (std::size_t k = i; k < e; ++k) members.push_back(&split.samples[k]);
      const auto pred = models::predict(*model, members, opts.batch_size);
      const int n = members.front()->n;
      const field::Dims d{n, n, n};
      const std::int64_t nv = field::voxel_count(d);
      for (std::size_t k = 0; k < members.size(); ++k) {
        field::Volume3f pv(d, Eigen::Map<const field::Volume3f::Array>(pred.data() + k * nv, nv));
        field::Volume3f tv(d, Eigen::Map<const field::Volume3f::Array>(members[k]->target.data(), nv));
        scored.push_back(score_sample(members[k]->id, pv, tv, opts.thresholds));
      }
    }
  }
  return make_report(std::move(scored), opts.thresholds);
}

void write_report(const fs::path& dir, const MetricReport& r) {
  fs::create_directories(dir);
  write_per_sample_csv(dir / "per_sample.csv", r);
  write_summary_csv(dir / "summary.csv", r);
  write_dice_curve_csv(dir / "dice_curve.csv", r);
  auto f = open_out(dir / "summary.json");
  f << summary_json(r).dump(2) << '\n';
}

}  // namespace tumornet::eval
