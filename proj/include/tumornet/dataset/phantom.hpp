#pragma once

#include <array>
#include <cstdint>

#include <json.hpp>

#include "tumornet/field/tissue.hpp"

namespace tumornet::dataset {

// Procedural stand-in for an atlas: an ellipsoidal brain with a gray-matter
// cortex, white-matter interior, two lateral ventricles and a thin CSF rim.
// Every random perturbation is scaled by `wobble`, so wobble = 0 gives the
// same left-right symmetric map for every seed.
struct PhantomSpec {
  field::Dims dims{64, 64, 64};
  std::array<double, 3> brain_axes{0.78, 0.90, 0.74};  // semi-axes as a fraction of n/2
  double cortex_thickness = 3.0;                       // voxels
  double csf_rim = 1.5;                                // voxels of CSF outside the cortex
  std::array<double, 3> ventricle_axes{0.10, 0.30, 0.14};
  std::array<double, 3> ventricle_offset{0.14, 0.02, 0.04};  // +-x, y, z offsets as fraction of n/2
  double smoothing_sigma = 0.75;
  double wobble = 0.08;

  void validate() const;
};

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

field::TissueMap gen_phantom(const PhantomSpec& spec, std::uint64_t seed);

// Number of 6-connected components of {wm >= 0.5}.
int white_matter_components(const field::TissueMap& t);

}  // namespace tumornet::dataset
