#include "tumornet/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tumornet::eval {

namespace {

template <typename Scalar>
void require_same_shape(const Volume3<Scalar>& a, const Volume3<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::shape_mismatch, std::string(what) + ": shape mismatch " + field::to_string(a.dims()) +
                                               " vs " + field::to_string(b.dims()));
  }
}

// 3D summed-volume table with a zero border: s(x+1,y+1,z+1) = sum over [0..x]x[0..y]x[0..z].
class IntegralVolume {
 public:
  IntegralVolume(const field::Dims& d, const std::vector<double>& values)
      : nx_(d[0] + 1), ny_(d[1] + 1), table_(static_cast<std::size_t>(nx_) * ny_ * (d[2] + 1), 0.0) {
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          const double v = values[x + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z)];
          at(x + 1, y + 1, z + 1) = v + at(x, y + 1, z + 1) + at(x + 1, y, z + 1) + at(x + 1, y + 1, z) -
                                    at(x, y, z + 1) - at(x, y + 1, z) - at(x + 1, y, z) + at(x, y, z);
        }
  }

  // Sum over the box [x, x+w) x [y, y+w) x [z, z+w).
  double box(int x, int y, int z, int w) const {
    const int X = x + w, Y = y + w, Z = z + w;
    return at(X, Y, Z) - at(x, Y, Z) - at(X, y, Z) - at(X, Y, z) + at(x, y, Z) + at(x, Y, z) + at(X, y, z) -
           at(x, y, z);
  }

 private:
  double& at(int x, int y, int z) { return table_[x + static_cast<std::size_t>(nx_) * (y + static_cast<std::size_t>(ny_) * z)]; }
  double at(int x, int y, int z) const {
    return table_[x + static_cast<std::size_t>(nx_) * (y + static_cast<std::size_t>(ny_) * z)];
  }

  int nx_, ny_;
  std::vector<double> table_;
};

}  // namespace

template <typename Scalar>
double mse(const Volume3<Scalar>& pred, const Volume3<Scalar>& target) {
  require_same_shape(pred, target, "mse");
  CompensatedSum s;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    s.add(d * d);
  }
  return s.value() / static_cast<double>(pred.size());
}

template <typename Scalar>
double mae(const Volume3<Scalar>& pred, const Volume3<Scalar>& target) {
  require_same_shape(pred, target, "mae");
  CompensatedSum s;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    s.add(std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i])));
  }
  return s.value() / static_cast<double>(pred.size());
}

template <typename Scalar>
double ssim3d(const Volume3<Scalar>& pred, const Volume3<Scalar>& target, const SsimOptions& opt) {
  require_same_shape(pred, target, "ssim3d");
  const auto& d = pred.dims();
  const int w = opt.window;
  if (d[0] < w || d[1] < w || d[2] < w) {
    throw Error(ErrorCode::invalid_argument,
                "ssim3d: volume " + field::to_string(d) + " smaller than window " + std::to_string(w));
  }
  const std::size_t n = static_cast<std::size_t>(pred.size());
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pred[static_cast<std::int64_t>(i)];
    y[i] = target[static_cast<std::int64_t>(i)];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const IntegralVolume sx(d, x), sy(d, y), sxx(d, xx), syy(d, yy), sxy(d, xy);
  const double c1 = (opt.k1 * opt.data_range) * (opt.k1 * opt.data_range);
  const double c2 = (opt.k2 * opt.data_range) * (opt.k2 * opt.data_range);
  const double inv = 1.0 / (static_cast<double>(w) * w * w);
  CompensatedSum total;
  std::size_t count = 0;
  for (int z = 0; z + w <= d[2]; ++z)
    for (int yy0 = 0; yy0 + w <= d[1]; ++yy0)
      for (int x0 = 0; x0 + w <= d[0]; ++x0) {
        const double mx = sx.box(x0, yy0, z, w) * inv;
        const double my = sy.box(x0, yy0, z, w) * inv;
        // Clamp tiny negative variances produced by cancellation in the tables.
        const double vx = std::max(0.0, sxx.box(x0, yy0, z, w) * inv - mx * mx);
        const double vy = std::max(0.0, syy.box(x0, yy0, z, w) * inv - my * my);
        const double lim = std::sqrt(vx * vy);
        const double cxy = std::clamp(sxy.box(x0, yy0, z, w) * inv - mx * my, -lim, lim);
        total.add(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)));
        ++count;
      }
  return total.value() / static_cast<double>(count);
}

template <typename Scalar>
std::optional<double> dice(const Volume3<Scalar>& pred, const Volume3<Scalar>& target, double tau) {
  require_same_shape(pred, target, "dice");
  std::int64_t a = 0, b = 0, both = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const bool in_a = static_cast<double>(pred[i]) >= tau;
    const bool in_b = static_cast<double>(target[i]) >= tau;
    a += in_a;
    b += in_b;
    both += in_a && in_b;
  }
  if (a + b == 0) return std::nullopt;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 19; ++k) t.push_back(k / 20.0);
  return t;
}

template <typename Scalar>
std::vector<std::optional<double>> dice_curve(const Volume3<Scalar>& pred, const Volume3<Scalar>& target,
                                              std::span<const double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorCode::invalid_argument, "dice_curve: empty threshold grid");
  std::vector<std::optional<double>> out;
  out.reserve(thresholds.size());
  for (double tau : thresholds) out.push_back(dice(pred, target, tau));
  return out;
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) {
    a.mean = std::nan("");
    a.degenerate = true;
    return a;
  }
  CompensatedSum s;
  for (double v : values) s.add(v);
  a.mean = s.value() / static_cast<double>(a.n);
  if (a.n < 2) {
    a.degenerate = true;
    return a;
  }
  CompensatedSum ss;
  for (double v : values) ss.add((v - a.mean) * (v - a.mean));
  const double var = ss.value() / static_cast<double>(a.n - 1);
  a.stderr_ = std::sqrt(var / static_cast<double>(a.n));
  return a;
}

Aggregate aggregate(std::span<const std::optional<double>> values) {
  std::vector<double> defined;
  std::size_t undefined = 0;
  for (const auto& v : values) {
    if (v) {
      defined.push_back(*v);
    } else {
      ++undefined;
    }
  }
  Aggregate a = aggregate(defined);
  a.n_undefined = undefined;
  return a;
}

#define TUMORNET_INSTANTIATE_METRICS(S)                                                                 \
  template double mse(const Volume3<S>&, const Volume3<S>&);                                            \
  template double mae(const Volume3<S>&, const Volume3<S>&);                                            \
  template double ssim3d(const Volume3<S>&, const Volume3<S>&, const SsimOptions&);                     \
  template std::optional<double> dice(const Volume3<S>&, const Volume3<S>&, double);                    \
  template std::vector<std::optional<double>> dice_curve(const Volume3<S>&, const Volume3<S>&,          \
                                                         std::span<const double>);

TUMORNET_INSTANTIATE_METRICS(float)
TUMORNET_INSTANTIATE_METRICS(double)

#undef TUMORNET_INSTANTIATE_METRICS

}  // namespace tumornet::eval
