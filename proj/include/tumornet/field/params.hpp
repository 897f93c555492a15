#pragma once

#include <array>

#include <json.hpp>

namespace tumornet::field {

// Growth parameters of the reaction-diffusion model.
//   rho  proliferation rate [1/time]
//   d_w  white-matter diffusivity [voxel^2/time]
//   seed tumor origin, normalized to [0,1]^3 over the volume extent; the voxel
//        coordinate along axis i is seed[i] * (n_i - 1).
struct GrowthParams {
  double rho = 0.1;
  double d_w = 0.1;
  std::array<double, 3> seed{0.5, 0.5, 0.5};

  void validate() const;
  bool operator==(const GrowthParams&) const = default;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Range&) const = default;
};

// Per-parameter bounds, ordered as (rho, d_w, x, y, z).
struct ParamRanges {
  Range rho{0.05, 0.15};
  Range d_w{0.02, 0.5};
  Range x{0.0, 1.0};
  Range y{0.0, 1.0};
  Range z{0.0, 1.0};

  std::array<Range, 5> as_array() const { return {rho, d_w, x, y, z}; }
  void validate() const;
  bool operator==(const ParamRanges&) const = default;
};

using NormalizedParams = std::array<double, 5>;

std::array<double, 5> to_array(const GrowthParams& p);
GrowthParams from_array(const std::array<double, 5>& a);

// Affine map of every component onto [0,1]. Out-of-range components are
// clamped and a warning is printed to stderr.
NormalizedParams normalize_params(const GrowthParams& p, const ParamRanges& r);
GrowthParams denormalize_params(const NormalizedParams& n, const ParamRanges& r);

void to_json(nlohmann::json& j, const GrowthParams& p);
void from_json(const nlohmann::json& j, GrowthParams& p);
void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const ParamRanges& r);
void from_json(const nlohmann::json& j, ParamRanges& r);

}  // namespace tumornet::field
