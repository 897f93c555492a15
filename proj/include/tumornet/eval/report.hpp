#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/dataset/manifest.hpp"
#include "tumornet/eval/metrics.hpp"

namespace tumornet::eval {

struct SampleMetrics {
  std::string id;
  double mse = 0.0;
  double mae = 0.0;
  double ssim = 0.0;
  std::vector<std::optional<double>> dice;  // one per threshold
};

SampleMetrics score_sample(const std::string& id, const field::Volume3f& pred, const field::Volume3f& target,
                           const std::vector<double>& thresholds);

struct MetricReport {
  std::vector<double> thresholds;
  std::vector<SampleMetrics> samples;
  Aggregate mse, mae, ssim;
  std::vector<Aggregate> dice;  // per threshold

  // Recomputes the aggregates from `samples`.
  void aggregate_all();
  std::size_t size() const { return samples.size(); }
};

MetricReport make_report(std::vector<SampleMetrics> samples, std::vector<double> thresholds);

// "dice@0.05" style column label.
std::string dice_label(double tau);

// id,mse,mae,ssim,dice@0.05,...   (undefined dice written as "nan")
void write_per_sample_csv(const std::filesystem::path& path, const MetricReport& r);
// metric,mean,stderr,n,n_undefined  with rows mse, mae, ssim, dice@...
void write_summary_csv(const std::filesystem::path& path, const MetricReport& r);
// threshold,mean,stderr,n,n_undefined
void write_dice_curve_csv(const std::filesystem::path& path, const MetricReport& r);
// Aggregates plus per-metric degenerate flags (n < 2).
nlohmann::json summary_json(const MetricReport& r);

// What produces the predictions being scored.
struct Predictor {
  enum class Kind { checkpoint, solver };
  Kind kind = Kind::checkpoint;
  std::filesystem::path checkpoint;  // kind == checkpoint

  static Predictor solver() { return {Kind::solver, {}}; }
  static Predictor from_checkpoint(std::filesystem::path p) { return {Kind::checkpoint, std::move(p)}; }
  std::string describe() const;
};

struct EvalOptions {
  dataset::Split split = dataset::Split::test;
  std::vector<double> thresholds = default_thresholds();
  int batch_size = 4;
  std::size_t limit = 0;  // first N samples of the split; 0: all
};

// Scores the predictor on a manifest split. The solver predictor regenerates
// every sample from its recorded seeds and compares with the stored target.
MetricReport evaluate(const Predictor& p, const dataset::Manifest& m, const EvalOptions& opts = {});

// Writes per_sample.csv, summary.csv, dice_curve.csv and summary.json.
void write_report(const std::filesystem::path& dir, const MetricReport& r);

}  // namespace tumornet::eval
