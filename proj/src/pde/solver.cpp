#include "tumornet/pde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tumornet::pde {

void SimulationConfig::validate() const {
  if (!(t_end > 0)) throw Error(ErrorCode::invalid_argument, "t_end must be > 0");
  if (dt && !(*dt > 0)) throw Error(ErrorCode::invalid_argument, "explicit dt must be > 0");
  if (!(tissue_ratio >= 1)) throw Error(ErrorCode::invalid_argument, "tissue_ratio must be >= 1");
  if (record_every < 0) throw Error(ErrorCode::invalid_argument, "record_every must be >= 0");
}

void to_json(nlohmann::json& j, const SimulationConfig& c) {
  j = nlohmann::json{{"t_end", c.t_end},
                     {"dt", c.dt ? nlohmann::json(*c.dt) : nlohmann::json("auto")},
                     {"tissue_ratio", c.tissue_ratio},
                     {"clamp", c.clamp},
                     {"record_every", c.record_every}};
}

void from_json(const nlohmann::json& j, SimulationConfig& c) {
  static const std::vector<std::string> keys{"t_end", "dt", "tissue_ratio", "clamp", "record_every"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw Error(ErrorCode::config, "unknown key in simulation config: " + it.key());
    }
  }
  if (j.contains("t_end")) j.at("t_end").get_to(c.t_end);
  if (j.contains("dt")) {
    const auto& dt = j.at("dt");
    if (dt.is_string()) {
      if (dt.get<std::string>() != "auto") throw Error(ErrorCode::config, "dt must be a number or \"auto\"");
      c.dt.reset();
    } else {
      c.dt = dt.get<double>();
    }
  }
  if (j.contains("tissue_ratio")) j.at("tissue_ratio").get_to(c.tissue_ratio);
  if (j.contains("clamp")) j.at("clamp").get_to(c.clamp);
  if (j.contains("record_every")) j.at("record_every").get_to(c.record_every);
}

DiffusionField build_diffusion_field(const TissueMap& t, const GrowthParams& p, const SimulationConfig& cfg) {
  Volume3d d(t.dims(), 0.0, t.wm.spacing());
  const double d_g = p.d_w / cfg.tissue_ratio;
  for (std::int64_t i = 0; i < d.size(); ++i) {
    const double wm = t.wm[i], gm = t.gm[i], csf = t.csf[i];
    if (csf >= 0.5 || wm + gm == 0.0) continue;
    d[i] = p.d_w * wm + d_g * gm;
  }
  return {std::move(d)};
}

field::Index3 seed_voxel(const field::Dims& dims, const std::array<double, 3>& seed) {
  field::Index3 v{};
  for (int a = 0; a < 3; ++a) {
    v[a] = std::clamp(static_cast<int>(std::lround(seed[a] * (dims[a] - 1))), 0, dims[a] - 1);
  }
  return v;
}

Volume3d seed_initial_condition(const TissueMap& t, const GrowthParams& p) {
  const auto sv = seed_voxel(t.dims(), p.seed);
  const std::int64_t si = t.wm.index(sv[0], sv[1], sv[2]);
  if (!(static_cast<double>(t.wm[si]) + t.gm[si] > 0.0)) {
    throw Error(ErrorCode::seed_outside_tissue, "seed outside diffusible tissue at voxel (" + std::to_string(sv[0]) +
                                                    "," + std::to_string(sv[1]) + "," + std::to_string(sv[2]) + ")");
  }
  Volume3d c(t.dims(), 0.0, t.wm.spacing());
  const double inv_two_sigma2 = 1.0 / (2.0 * kSeedSigma * kSeedSigma);
  for (int z = 0; z < c.nz(); ++z) {
    for (int y = 0; y < c.ny(); ++y) {
      for (int x = 0; x < c.nx(); ++x) {
        const std::int64_t i = c.index(x, y, z);
        if (static_cast<double>(t.wm[i]) + t.gm[i] == 0.0) continue;
        const double dx = x - sv[0], dy = y - sv[1], dz = z - sv[2];
        c[i] = kSeedAmplitude * std::exp(-(dx * dx + dy * dy + dz * dz) * inv_two_sigma2);
      }
    }
  }
  return c;
}

double stable_dt(const DiffusionField& dfield, double rho, double h) {
  if (!(rho > 0)) throw Error(ErrorCode::invalid_argument, "stable_dt requires rho > 0");
  const double dmax = dfield.d.array().maxCoeff();
  if (dmax <= 0.0) return 0.9 / rho;
  return 0.9 * std::min(h * h / (6.0 * dmax), 1.0 / rho);
}

namespace {

inline double harmonic(double a, double b) { return (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0; }

}  // namespace

FaceCoefficients face_coefficients(const DiffusionField& dfield) {
  const Volume3d& d = dfield.d;
  const int nx = d.nx(), ny = d.ny(), nz = d.nz();
  FaceCoefficients f;
  f.dims = d.dims();
  f.fx.resize(d.size());
  f.fy.resize(d.size());
  f.fz.resize(d.size());
  for (int z = 0; z < nz; ++z) {
    const int zp = z + 1 == nz ? 0 : z + 1;
    for (int y = 0; y < ny; ++y) {
      const int yp = y + 1 == ny ? 0 : y + 1;
      for (int x = 0; x < nx; ++x) {
        const int xp = x + 1 == nx ? 0 : x + 1;
        const std::int64_t i = d.index(x, y, z);
        f.fx[i] = harmonic(d[i], d(xp, y, z));
        f.fy[i] = harmonic(d[i], d(x, yp, z));
        f.fz[i] = harmonic(d[i], d(x, y, zp));
      }
    }
  }
  return f;
}

void step_into(const Volume3d& c, const FaceCoefficients& faces, double rho, double dt, double h, bool clamp,
               Volume3d& out, int step_index) {
  if (c.dims() != faces.dims) throw Error(ErrorCode::shape_mismatch, "state and diffusion field dims disagree");
  if (!out.same_shape(c)) out = Volume3d(c.dims(), 0.0, c.spacing());
  const int nx = c.nx(), ny = c.ny(), nz = c.nz();
  const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
  const double inv_h2 = 1.0 / (h * h);
  const double* cv = c.data();
  const double* fx = faces.fx.data();
  const double* fy = faces.fy.data();
  const double* fz = faces.fz.data();
  double* ov = out.data();
  bool finite = true;

#pragma omp parallel for reduction(&& : finite) schedule(static)
  for (int z = 0; z < nz; ++z) {
    const std::int64_t zm = (z == 0 ? nz - 1 : z - 1) * sz, zp = (z + 1 == nz ? 0 : z + 1) * sz;
    for (int y = 0; y < ny; ++y) {
      const std::int64_t ym = (y == 0 ? ny - 1 : y - 1) * sy, yp = (y + 1 == ny ? 0 : y + 1) * sy;
      const std::int64_t row = z * sz + y * sy;
      for (int x = 0; x < nx; ++x) {
        const int xm = x == 0 ? nx - 1 : x - 1, xp = x + 1 == nx ? 0 : x + 1;
        const std::int64_t i = row + x;
        const double ci = cv[i];
        const double flux = fx[i] * (cv[row + xp] - ci) + fx[row + xm] * (cv[row + xm] - ci) +
                            fy[i] * (cv[z * sz + yp + x] - ci) + fy[z * sz + ym + x] * (cv[z * sz + ym + x] - ci) +
                            fz[i] * (cv[zp + y * sy + x] - ci) + fz[zm + y * sy + x] * (cv[zm + y * sy + x] - ci);
        double next = ci + dt * (flux * inv_h2 + rho * ci * (1.0 - ci));
        finite = finite && std::isfinite(next);
        if (clamp) next = std::clamp(next, 0.0, 1.0);
        ov[i] = next;
      }
    }
  }
  if (!finite) {
    throw Error(ErrorCode::numerical_blowup, "numerical blow-up at step " + std::to_string(step_index));
  }
}

Volume3d step(const Volume3d& c, const DiffusionField& dfield, double rho, double dt, double h, bool clamp,
              int step_index) {
  if (!c.same_shape(dfield.d)) throw Error(ErrorCode::shape_mismatch, "state and diffusion field dims disagree");
  Volume3d out(c.dims(), 0.0, c.spacing());
  step_into(c, face_coefficients(dfield), rho, dt, h, clamp, out, step_index);
  return out;
}

SimulationResult integrate(const Volume3d& c0, const DiffusionField& dfield, double rho, const SimulationConfig& cfg) {
  cfg.validate();
  if (!(rho >= 0)) throw Error(ErrorCode::invalid_argument, "rho must be >= 0");
  const double h = dfield.d.spacing();
  SimulationResult result;
  if (cfg.dt) {
    result.dt = *cfg.dt;
    if (rho > 0 && result.dt > stable_dt(dfield, rho, h) * (1 + 1e-12)) {
      throw Error(ErrorCode::invalid_argument, "explicit dt " + std::to_string(result.dt) + " exceeds stable_dt");
    }
  } else {
    // rho = 0 only reaches here through integrate(); bound by diffusion alone.
    result.dt = rho > 0 ? stable_dt(dfield, rho, h) : stable_dt(dfield, 1e-300, h);
  }
  const int n = std::max(1, static_cast<int>(std::ceil(cfg.t_end / result.dt * (1.0 - 1e-12))));
  const FaceCoefficients faces = face_coefficients(dfield);
  Volume3d cur = c0, next(c0.dims(), 0.0, c0.spacing());
  if (cfg.record_every > 0) result.snapshots.emplace_back(0, cur);
  for (int k = 0; k < n; ++k) {
    const double dt_k = k + 1 == n ? cfg.t_end - result.dt * (n - 1) : result.dt;
    step_into(cur, faces, rho, dt_k, h, cfg.clamp, next, k + 1);
    std::swap(cur, next);
    if (cfg.record_every > 0 && ((k + 1) % cfg.record_every == 0 || k + 1 == n)) {
      result.snapshots.emplace_back(k + 1, cur);
    }
  }
  result.steps = n;
  result.final_state = std::move(cur);
  return result;
}

SimulationResult simulate(const TissueMap& t, const GrowthParams& p, const SimulationConfig& cfg) {
  t.validate();
  p.validate();
  const DiffusionField dfield = build_diffusion_field(t, p, cfg);
  return integrate(seed_initial_condition(t, p), dfield, p.rho, cfg);
}

}  // namespace tumornet::pde
