#pragma once

#include <cstdint>
#include <vector>

#include "tumornet/field/params.hpp"
#include "tumornet/field/tissue.hpp"

namespace tumornet::dataset {

inline constexpr int kSeedBoundaryMargin = 3;

// Voxels with wm > 0.5 whose chessboard distance to the nearest non-brain
// voxel (wm + gm + csf < 0.5) is at least kSeedBoundaryMargin.
std::vector<std::int64_t> eligible_seed_voxels(const field::TissueMap& t);

// rho ~ Uniform, d_w ~ LogUniform, seed uniform over eligible voxels.
field::GrowthParams sample_params(const field::ParamRanges& r, const field::TissueMap& t, std::uint64_t rng_seed);

}  // namespace tumornet::dataset
