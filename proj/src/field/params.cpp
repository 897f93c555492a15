#include "tumornet/field/params.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "tumornet/core/error.hpp"

namespace tumornet::field {

namespace {

constexpr std::array<const char*, 5> kNames{"rho", "d_w", "x", "y", "z"};

}  // namespace

void GrowthParams::validate() const {
  if (!(rho > 0) || !std::isfinite(rho)) throw Error(ErrorCode::invalid_argument, "rho must be > 0");
  if (!(d_w >= 0) || !std::isfinite(d_w)) throw Error(ErrorCode::invalid_argument, "d_w must be >= 0");
  for (double s : seed) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::invalid_argument, "seed coordinates must lie in [0,1]");
  }
}

void ParamRanges::validate() const {
  const auto a = as_array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].lo < a[i].hi)) {
      throw Error(ErrorCode::degenerate_range, std::string("degenerate range for ") + kNames[i]);
    }
  }
}

std::array<double, 5> to_array(const GrowthParams& p) {
  return {p.rho, p.d_w, p.seed[0], p.seed[1], p.seed[2]};
}

GrowthParams from_array(const std::array<double, 5>& a) {
  return GrowthParams{a[0], a[1], {a[2], a[3], a[4]}};
}

NormalizedParams normalize_params(const GrowthParams& p, const ParamRanges& r) {
  r.validate();
  const auto raw = to_array(p);
  const auto ranges = r.as_array();
  NormalizedParams out{};
  for (std::size_t i = 0; i < 5; ++i) {
    double v = (raw[i] - ranges[i].lo) / (ranges[i].hi - ranges[i].lo);
    if (v < 0.0 || v > 1.0) {
      std::cerr << "warning: parameter " << kNames[i] << " = " << raw[i] << " outside [" << ranges[i].lo << ", "
                << ranges[i].hi << "], clamped\n";
      v = std::clamp(v, 0.0, 1.0);
    }
    out[i] = v;
  }
  return out;
}

GrowthParams denormalize_params(const NormalizedParams& n, const ParamRanges& r) {
  r.validate();
  const auto ranges = r.as_array();
  std::array<double, 5> raw{};
  for (std::size_t i = 0; i < 5; ++i) raw[i] = ranges[i].lo + n[i] * (ranges[i].hi - ranges[i].lo);
  return from_array(raw);
}

void to_json(nlohmann::json& j, const GrowthParams& p) {
  j = nlohmann::json{{"rho", p.rho}, {"d_w", p.d_w}, {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, GrowthParams& p) {
  j.at("rho").get_to(p.rho);
  j.at("d_w").get_to(p.d_w);
  j.at("seed").get_to(p.seed);
}

void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }

void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::config, "range must be a [lo, hi] pair");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

void to_json(nlohmann::json& j, const ParamRanges& r) {
  j = nlohmann::json{{"rho", r.rho}, {"d_w", r.d_w}, {"x", r.x}, {"y", r.y}, {"z", r.z}};
}

void from_json(const nlohmann::json& j, ParamRanges& r) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kNames.begin(), kNames.end(), it.key()) == kNames.end()) {
      throw Error(ErrorCode::config, "unknown key in ranges: " + it.key());
    }
  }
  if (j.contains("rho")) j.at("rho").get_to(r.rho);
  if (j.contains("d_w")) j.at("d_w").get_to(r.d_w);
  if (j.contains("x")) j.at("x").get_to(r.x);
  if (j.contains("y")) j.at("y").get_to(r.y);
  if (j.contains("z")) j.at("z").get_to(r.z);
}

}  // namespace tumornet::field
