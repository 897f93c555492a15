#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tumornet/field/params.hpp"
#include "tumornet/field/tissue.hpp"
#include "tumornet/field/volume.hpp"

namespace tumornet::pde {

using field::GrowthParams;
using field::TissueMap;
using field::Volume3d;

struct SimulationConfig {
  double t_end = 100.0;
  std::optional<double> dt;  // nullopt selects stable_dt
  double tissue_ratio = 10.0;  // D_w / D_g
  bool clamp = true;
  int record_every = 0;  // 0 disables snapshots

  void validate() const;
};

void to_json(nlohmann::json& j, const SimulationConfig& c);
void from_json(const nlohmann::json& j, SimulationConfig& c);

struct DiffusionField {
  Volume3d d;
};

// Gaussian seed amplitude and width (voxels).
inline constexpr double kSeedAmplitude = 0.8;
inline constexpr double kSeedSigma = 1.0;

// d = d_w * wm + (d_w / r) * gm, forced to zero where csf >= 0.5 or wm + gm = 0.
DiffusionField build_diffusion_field(const TissueMap& t, const GrowthParams& p, const SimulationConfig& cfg);

// Voxel holding the normalized seed position: round(seed * (n - 1)).
field::Index3 seed_voxel(const field::Dims& dims, const std::array<double, 3>& seed);

Volume3d seed_initial_condition(const TissueMap& t, const GrowthParams& p);

// 0.9 * min(h^2 / (6 max d), 1 / rho), or 0.9 / rho without diffusion.
double stable_dt(const DiffusionField& dfield, double rho, double h);

// Face diffusivities for the flux-form stencil: harmonic means between each
// voxel and its +x / +y / +z periodic neighbour.
struct FaceCoefficients {
  field::Dims dims{};
  std::vector<double> fx, fy, fz;
};

FaceCoefficients face_coefficients(const DiffusionField& dfield);

// One explicit Euler step. Throws ErrorCode::numerical_blowup if the result is
// not finite; `step_index` is reported in the message.
Volume3d step(const Volume3d& c, const DiffusionField& dfield, double rho, double dt, double h, bool clamp = true,
              int step_index = 0);
void step_into(const Volume3d& c, const FaceCoefficients& faces, double rho, double dt, double h, bool clamp,
               Volume3d& out, int step_index = 0);

struct SimulationResult {
  Volume3d final_state;
  std::vector<std::pair<int, Volume3d>> snapshots;  // (step index, state)
  int steps = 0;
  double dt = 0.0;
};

// Integrates from `c0` up to cfg.t_end; the last step is shortened so the run
// lands exactly on t_end.
SimulationResult integrate(const Volume3d& c0, const DiffusionField& dfield, double rho, const SimulationConfig& cfg);

SimulationResult simulate(const TissueMap& t, const GrowthParams& p, const SimulationConfig& cfg);

}  // namespace tumornet::pde
