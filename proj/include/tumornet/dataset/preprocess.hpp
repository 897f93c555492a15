#pragma once

#include <array>

#include <json.hpp>

#include "tumornet/field/params.hpp"
#include "tumornet/field/tissue.hpp"
#include "tumornet/field/transforms.hpp"

namespace tumornet::dataset {

// Record of what preprocess() did, enough to map results back to the frame
// of the simulation grid.
struct Provenance {
  field::Dims source_dims{};
  field::Index3 shift{};
  field::Dims crop_dims{};
  field::Index3 crop_offset{};
  field::Dims out_dims{};

  bool operator==(const Provenance&) const = default;
};

void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

struct Preprocessed {
  field::TissueMap tissue;
  field::Volume3f tumor;
  Provenance provenance;
};

// Integer shift bringing round(center_of_mass(tumor)) to n/2, applied to all
// channels (fill 0); centered crop to `work_dims`; trilinear resize to `out_dims`.
Preprocessed preprocess(const field::TissueMap& tissue, const field::Volume3f& tumor, const field::Dims& work_dims,
                        const field::Dims& out_dims);

// Maps a preprocessed volume back onto the simulation grid (inverse resize,
// un-crop with zeros, inverse shift).
field::Volume3f restore_frame(const field::Volume3f& v, const Provenance& p);

// Seed coordinate of `raw` (normalized over the simulation grid) expressed as
// a normalized coordinate of the preprocessed grid.
std::array<double, 3> seed_to_model_frame(const std::array<double, 3>& seed, const Provenance& p);

struct Sample {
  field::TissueMap tissue;
  field::Volume3f tumor;
  field::GrowthParams params;  // seed in the frame of `tissue`
};

// Applies `t` to every tissue channel and to the tumor; the seed follows the
// same symmetry in normalized coordinates, rho and d_w are untouched.
Sample augment(const Sample& s, const field::AxisTransform& t);

}  // namespace tumornet::dataset
