#include "tumornet/dataset/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "tumornet/core/rng.hpp"

namespace tumornet::dataset {

using field::Dims;
using field::TissueMap;
using field::Volume3f;

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 8) throw Error(ErrorCode::invalid_argument, "phantom dims must be at least 8");
    if (!(brain_axes[a] > 0 && brain_axes[a] <= 1)) {
      throw Error(ErrorCode::invalid_argument, "brain_axes must lie in (0, 1]");
    }
    if (!(ventricle_axes[a] >= 0)) throw Error(ErrorCode::invalid_argument, "ventricle_axes must be >= 0");
  }
  if (!(cortex_thickness > 0)) throw Error(ErrorCode::invalid_argument, "cortex_thickness must be > 0");
  if (!(csf_rim >= 0)) throw Error(ErrorCode::invalid_argument, "csf_rim must be >= 0");
  if (!(smoothing_sigma >= 0)) throw Error(ErrorCode::invalid_argument, "smoothing_sigma must be >= 0");
  if (!(wobble >= 0 && wobble < 0.5)) throw Error(ErrorCode::invalid_argument, "wobble must lie in [0, 0.5)");
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = nlohmann::json{{"dims", s.dims},
                     {"brain_axes", s.brain_axes},
                     {"cortex_thickness", s.cortex_thickness},
                     {"csf_rim", s.csf_rim},
                     {"ventricle_axes", s.ventricle_axes},
                     {"ventricle_offset", s.ventricle_offset},
                     {"smoothing_sigma", s.smoothing_sigma},
                     {"wobble", s.wobble}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
  static const std::vector<std::string> keys{"dims",           "brain_axes",       "cortex_thickness",
                                             "csf_rim",        "ventricle_axes",   "ventricle_offset",
                                             "smoothing_sigma", "wobble"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw Error(ErrorCode::config, "unknown key in phantom spec: " + it.key());
    }
  }
  if (j.contains("dims")) j.at("dims").get_to(s.dims);
  if (j.contains("brain_axes")) j.at("brain_axes").get_to(s.brain_axes);
  if (j.contains("cortex_thickness")) j.at("cortex_thickness").get_to(s.cortex_thickness);
  if (j.contains("csf_rim")) j.at("csf_rim").get_to(s.csf_rim);
  if (j.contains("ventricle_axes")) j.at("ventricle_axes").get_to(s.ventricle_axes);
  if (j.contains("ventricle_offset")) j.at("ventricle_offset").get_to(s.ventricle_offset);
  if (j.contains("smoothing_sigma")) j.at("smoothing_sigma").get_to(s.smoothing_sigma);
  if (j.contains("wobble")) j.at("wobble").get_to(s.wobble);
}

namespace {

// Smooth random function on the unit sphere, roughly in [-1, 1].
struct SphericalNoise {
  struct Term {
    std::array<double, 3> dir;
    double freq, phase, amp;
  };
  std::vector<Term> terms;

  SphericalNoise(Rng& rng, int count) {
    for (int k = 0; k < count; ++k) {
      Term t{};
      double norm = 0;
      for (double& d : t.dir) {
        d = standard_normal(rng);
        norm += d * d;
      }
      norm = std::sqrt(norm);
      for (double& d : t.dir) d /= norm;
      t.freq = uniform(rng, 1.5, 3.5);
      t.phase = uniform(rng, 0.0, 6.283185307179586);
      t.amp = uniform(rng, -1.0, 1.0) / std::sqrt(static_cast<double>(count));
      terms.push_back(t);
    }
  }

  double operator()(const std::array<double, 3>& u) const {
    double s = 0;
    for (const auto& t : terms) s += t.amp * std::sin(t.freq * (t.dir[0] * u[0] + t.dir[1] * u[1] + t.dir[2] * u[2]) + t.phase);
    return s;
  }
};

enum Label : std::uint8_t { kBackground, kWM, kGM, kCSF };

void blur_axis(std::vector<double>& v, const Dims& d, int axis, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  const std::array<std::int64_t, 3> stride{1, d[0], static_cast<std::int64_t>(d[0]) * d[1]};
  std::vector<double> out(v.size(), 0.0);
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const std::array<int, 3> p{x, y, z};
        const std::int64_t i = x + stride[1] * y + stride[2] * z;
        double s = 0;
        for (int k = -r; k <= r; ++k) {
          const int q = p[axis] + k;
          if (q < 0 || q >= d[axis]) continue;
          s += kernel[k + r] * v[i + k * stride[axis]];
        }
        out[i] = s;
      }
  v.swap(out);
}

}  // namespace

int white_matter_components(const TissueMap& t) {
  const auto& d = t.dims();
  std::vector<int> label(static_cast<std::size_t>(t.wm.size()), -1);
  int components = 0;
  for (std::int64_t start = 0; start < t.wm.size(); ++start) {
    if (t.wm[start] < 0.5f || label[start] >= 0) continue;
    std::queue<std::int64_t> q;
    q.push(start);
    label[start] = components;
    while (!q.empty()) {
      const std::int64_t i = q.front();
      q.pop();
      const auto c = t.wm.coords(i);
      static constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      for (const auto& o : kOff) {
        const int x = c[0] + o[0], y = c[1] + o[1], z = c[2] + o[2];
        if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) continue;
        const std::int64_t j = t.wm.index(x, y, z);
        if (t.wm[j] >= 0.5f && label[j] < 0) {
          label[j] = components;
          q.push(j);
        }
      }
    }
    ++components;
  }
  return components;
}

TissueMap gen_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const Dims& d = spec.dims;
  const double w = spec.wobble;
  auto jitter = [&](double scale) { return 1.0 + w * scale * uniform(rng, -1.0, 1.0); };

  std::array<double, 3> center{}, brain{}, vent{};
  const double global = jitter(0.5);
  for (int a = 0; a < 3; ++a) {
    center[a] = 0.5 * (d[a] - 1);
    brain[a] = spec.brain_axes[a] * 0.5 * d[a] * global * jitter(0.3);
    vent[a] = spec.ventricle_axes[a] * 0.5 * d[a] * jitter(0.5);
  }
  std::array<double, 3> vent_off{};
  for (int a = 0; a < 3; ++a) vent_off[a] = spec.ventricle_offset[a] * 0.5 * d[a] * jitter(0.5);
  const SphericalNoise outer(rng, 6), cortex(rng, 6);

  std::vector<std::uint8_t> labels(static_cast<std::size_t>(field::voxel_count(d)), kBackground);
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const std::array<double, 3> p{x - center[0], y - center[1], z - center[2]};
        const std::array<double, 3> e{p[0] / brain[0], p[1] / brain[1], p[2] / brain[2]};
        const double q = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
        const double len = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        const std::array<double, 3> u =
            q > 0 ? std::array<double, 3>{e[0] / q, e[1] / q, e[2] / q} : std::array<double, 3>{0, 0, 1};
        const double radius = 1.0 + w * outer(u);
        const double r = q / radius;
        const std::int64_t i = x + static_cast<std::int64_t>(d[0]) * (y + static_cast<std::int64_t>(d[1]) * z);
        if (r > 1.0) {
          const double dist_out = len * (1.0 - 1.0 / r);
          if (dist_out <= spec.csf_rim) labels[i] = kCSF;
          continue;
        }
        const double dist_in = r > 0 ? len * (1.0 / r - 1.0) : 1e9;
        const double thickness = std::max(1.0, spec.cortex_thickness * (1.0 + 3.0 * w * cortex(u)));
        labels[i] = dist_in < thickness ? kGM : kWM;
        for (int side : {-1, 1}) {
          const double vx = (p[0] - side * vent_off[0]) / vent[0];
          const double vy = (p[1] - vent_off[1]) / vent[1];
          const double vz = (p[2] - vent_off[2]) / vent[2];
          if (vent[0] > 0 && vent[1] > 0 && vent[2] > 0 && vx * vx + vy * vy + vz * vz <= 1.0) labels[i] = kCSF;
        }
      }

  std::array<std::vector<double>, 3> frac;
  for (auto& f : frac) f.assign(labels.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kWM) frac[0][i] = 1.0;
    if (labels[i] == kGM) frac[1][i] = 1.0;
    if (labels[i] == kCSF) frac[2][i] = 1.0;
  }
  if (spec.smoothing_sigma > 0) {
    const int r = static_cast<int>(std::ceil(3.0 * spec.smoothing_sigma));
    std::vector<double> kernel(2 * r + 1);
    double s = 0;
    for (int k = -r; k <= r; ++k) {
      kernel[k + r] = std::exp(-0.5 * k * k / (spec.smoothing_sigma * spec.smoothing_sigma));
      s += kernel[k + r];
    }
    for (double& k : kernel) k /= s;
    for (auto& f : frac)
      for (int axis = 0; axis < 3; ++axis) blur_axis(f, d, axis, kernel);
  }

  TissueMap t{Volume3f(d), Volume3f(d), Volume3f(d)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double wm = std::max(0.0, frac[0][i]), gm = std::max(0.0, frac[1][i]), csf = std::max(0.0, frac[2][i]);
    const double total = wm + gm + csf;
    if (total > 1.0) wm /= total, gm /= total, csf /= total;
    const auto idx = static_cast<std::int64_t>(i);
    t.wm[idx] = static_cast<float>(wm);
    t.gm[idx] = static_cast<float>(gm);
    t.csf[idx] = static_cast<float>(csf);
    // float rounding can push the sum a hair above one
    const double sum_f = static_cast<double>(t.wm[idx]) + t.gm[idx] + t.csf[idx];
    if (sum_f > 1.0 + 1e-7) t.wm[idx] = static_cast<float>(std::max(0.0, 1.0 - static_cast<double>(t.gm[idx]) - t.csf[idx]));
  }
  if (white_matter_components(t) != 1) {
    throw Error(ErrorCode::empty_white_matter, "phantom white matter must be nonempty and 6-connected");
  }
  return t;
}

}  // namespace tumornet::dataset
