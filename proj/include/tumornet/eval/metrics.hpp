#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tumornet/field/volume.hpp"

namespace tumornet::eval {

using field::Volume3;

template <typename Scalar>
double mse(const Volume3<Scalar>& pred, const Volume3<Scalar>& target);

template <typename Scalar>
double mae(const Volume3<Scalar>& pred, const Volume3<Scalar>& target);

struct SsimOptions {
  int window = 7;
  double data_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean SSIM over every fully contained window position (no padding), with a
// uniform window and population statistics inside each window.
template <typename Scalar>
double ssim3d(const Volume3<Scalar>& pred, const Volume3<Scalar>& target, const SsimOptions& opt = {});

// Dice of the masks {v >= tau}. Empty optional when both masks are empty.
template <typename Scalar>
std::optional<double> dice(const Volume3<Scalar>& pred, const Volume3<Scalar>& target, double tau);

// 0.05, 0.10, ..., 0.95
std::vector<double> default_thresholds();

template <typename Scalar>
std::vector<std::optional<double>> dice_curve(const Volume3<Scalar>& pred, const Volume3<Scalar>& target,
                                              std::span<const double> thresholds);

// Neumaier-compensated accumulator; summation results do not depend on how
// the inputs were partitioned beyond the final rounding.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(n)
  std::size_t n = 0;
  std::size_t n_undefined = 0;
  bool degenerate = false;  // n < 2: standard error reported as 0
};

Aggregate aggregate(std::span<const double> values);
Aggregate aggregate(std::span<const std::optional<double>> values);

}  // namespace tumornet::eval
