#include <doctest.h>

#include <cmath>

#include "tumornet/core/rng.hpp"
#include "tumornet/field/transforms.hpp"
#include "tumornet/pde/solver.hpp"

using namespace tumornet;
using namespace tumornet::field;
using namespace tumornet::pde;

namespace {

TissueMap uniform_tissue(const Dims& dims, float wm, float gm, float csf) {
  return TissueMap{Volume3f(dims, wm), Volume3f(dims, gm), Volume3f(dims, csf)};
}

// Closed-form logistic growth, the independent oracle for d_w = 0.
double logistic(double c0, double rho, double t) {
  const double e = std::exp(rho * t);
  return c0 * e / (1.0 + c0 * (e - 1.0));
}

// Random tissue with a CSF pocket and a background rim, symmetric in x when
// `mirror_x` is set.
TissueMap random_tissue(int n, std::uint64_t seed, bool mirror_x) {
  TissueMap t = uniform_tissue({n, n, n}, 0.0f, 0.0f, 0.0f);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int sx = mirror_x ? std::min(x, n - 1 - x) : x;
        Rng local(derive_seed(seed, (static_cast<std::uint64_t>(z) * n + y) * n + sx));
        const float wm = static_cast<float>(uniform01(local));
        const float gm = static_cast<float>((1.0 - wm) * uniform01(local));
        const bool rim = x == 0 || y == 0 || z == 0 || x == n - 1 || y == n - 1 || z == n - 1;
        const bool pocket = std::abs(y - n / 4) <= 1 && std::abs(z - n / 4) <= 1;
        if (rim) continue;
        if (pocket) {
          t.csf(x, y, z) = 1.0f;
          continue;
        }
        t.wm(x, y, z) = wm;
        t.gm(x, y, z) = gm;
      }
  return t;
}

}  // namespace

TEST_CASE("build_diffusion_field") {
  SimulationConfig cfg;
  GrowthParams p{0.1, 0.2, {0.5, 0.5, 0.5}};
  CHECK(build_diffusion_field(uniform_tissue({2, 2, 2}, 1, 0, 0), p, cfg).d[0] == doctest::Approx(0.2));
  CHECK(build_diffusion_field(uniform_tissue({2, 2, 2}, 0, 1, 0), p, cfg).d[0] == doctest::Approx(0.02));
  CHECK(build_diffusion_field(uniform_tissue({2, 2, 2}, 0, 0, 1), p, cfg).d[0] == 0.0);
  CHECK(build_diffusion_field(uniform_tissue({2, 2, 2}, 0.3f, 0.1f, 0.55f), p, cfg).d[0] == 0.0);
}

TEST_CASE("seed_initial_condition") {
  TissueMap t = uniform_tissue({9, 9, 9}, 1, 0, 0);
  GrowthParams p{0.1, 0.1, {0.5, 0.5, 0.5}};
  Volume3d c0 = seed_initial_condition(t, p);
  CHECK(c0(4, 4, 4) == doctest::Approx(0.8));
  CHECK(c0(6, 4, 4) == doctest::Approx(0.8 * std::exp(-2.0)).epsilon(1e-12));
  CHECK(c0(6, 4, 4) == doctest::Approx(0.1083).epsilon(1e-3));
  CHECK(c0.array().maxCoeff() <= 0.8);

  TissueMap csf = uniform_tissue({9, 9, 9}, 0, 0, 1);
  try {
    seed_initial_condition(csf, p);
    FAIL("expected seed error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::seed_outside_tissue);
  }
}

TEST_CASE("stable_dt") {
  DiffusionField f{Volume3d({2, 2, 2}, 0.0)};
  f.d[3] = 0.5;
  CHECK(stable_dt(f, 0.1, 1.0) == doctest::Approx(0.30));
  DiffusionField zero{Volume3d({2, 2, 2}, 0.0)};
  CHECK(stable_dt(zero, 0.1, 1.0) == doctest::Approx(9.0));
  DiffusionField small{Volume3d({2, 2, 2}, 0.01)};
  CHECK(stable_dt(small, 10.0, 1.0) == doctest::Approx(0.09));
  CHECK_THROWS_AS(stable_dt(small, 0.0, 1.0), Error);
}

TEST_CASE("step") {
  DiffusionField f{Volume3d({5, 5, 5}, 0.3)};
  Rng rng(3);
  for (std::int64_t i = 0; i < f.d.size(); ++i) f.d[i] = uniform01(rng);

  Volume3d uniform({5, 5, 5}, 0.4);
  Volume3d same = step(uniform, f, 0.0, 0.1, 1.0);
  CHECK((same.array() - 0.4).abs().maxCoeff() < 1e-15);

  Volume3d zero({5, 5, 5}, 0.0);
  CHECK((step(zero, f, 0.1, 0.1, 1.0).array() == 0.0).all());

  DiffusionField none{Volume3d({3, 3, 3}, 0.0)};
  Volume3d single({3, 3, 3}, 0.0);
  single(1, 1, 1) = 0.5;
  CHECK(step(single, none, 0.1, 1.0, 1.0)(1, 1, 1) == doctest::Approx(0.525));

  Volume3d bad({5, 5, 5}, 0.1);
  bad[7] = std::nan("");
  try {
    step(bad, f, 0.1, 0.1, 1.0, false, 17);
    FAIL("expected blow-up");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical_blowup);
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
}

TEST_CASE("simulate frozen dynamics") {
  TissueMap t = uniform_tissue({12, 12, 12}, 1, 0, 0);
  GrowthParams p{1e-12, 0.0, {0.5, 0.5, 0.5}};
  SimulationConfig cfg;
  const Volume3d c0 = seed_initial_condition(t, p);
  const Volume3d out = simulate(t, p, cfg).final_state;
  CHECK((out.array() - c0.array()).abs().maxCoeff() < 1e-6);
}

TEST_CASE("simulate lands exactly on t_end") {
  DiffusionField none{Volume3d({2, 2, 2}, 0.0)};
  SimulationConfig cfg;
  cfg.t_end = 1.0;
  cfg.dt = 0.3;
  auto r = integrate(Volume3d({2, 2, 2}, 0.1), none, 0.1, cfg);
  CHECK(r.steps == 4);
  // Hand-rolled Euler with steps 0.3, 0.3, 0.3, 0.1.
  double c = 0.1;
  for (double h : {0.3, 0.3, 0.3, 0.1}) c += h * 0.1 * c * (1 - c);
  CHECK(r.final_state[0] == doctest::Approx(c).epsilon(1e-15));
}

TEST_CASE("logistic convergence is first order") {
  DiffusionField none{Volume3d({4, 4, 4}, 0.0)};
  const double exact = logistic(0.1, 0.1, 10.0);
  CHECK(exact == doctest::Approx(0.23197).epsilon(1e-4));
  std::vector<double> errs;
  for (double dt : {0.4, 0.2, 0.1, 0.05, 0.025}) {
    SimulationConfig cfg;
    cfg.t_end = 10.0;
    cfg.dt = dt;
    cfg.clamp = false;
    errs.push_back(std::abs(integrate(Volume3d({4, 4, 4}, 0.1), none, 0.1, cfg).final_state[0] - exact));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    CHECK(errs[i] < errs[i - 1]);
    CHECK(errs[i - 1] / errs[i] == doctest::Approx(2.0).epsilon(0.1));
  }
  CHECK(errs.back() / exact <= 1e-3);
}

TEST_CASE("mass conservation and csf blocking") {
  const int n = 14;
  TissueMap t = random_tissue(n, 11, false);
  GrowthParams p{0.1, 0.4, {0.5, 0.5, 0.5}};
  SimulationConfig cfg;
  DiffusionField f = build_diffusion_field(t, p, cfg);
  Volume3d c = seed_initial_condition(t, p);
  const double m0 = c.array().sum();
  cfg.clamp = false;
  cfg.t_end = 200 * stable_dt(f, 1.0, 1.0);
  cfg.dt = stable_dt(f, 1.0, 1.0);
  Volume3d out = integrate(c, f, 0.0, cfg).final_state;
  CHECK(std::abs(out.array().sum() - m0) / m0 <= 1e-6);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (f.d[i] == 0.0 && c[i] == 0.0) CHECK(out[i] <= 1e-8);
  }
}

TEST_CASE("mirror equivariance and boundedness") {
  const int n = 13;
  TissueMap t = random_tissue(n, 21, true);
  for (int y = 1; y < n - 1; ++y) t.wm(6, y, 6) = 1.0f, t.gm(6, y, 6) = 0.0f, t.csf(6, y, 6) = 0.0f;
  GrowthParams p{0.15, 0.5, {0.5, 0.5, 0.5}};
  SimulationConfig cfg;
  cfg.clamp = false;
  cfg.t_end = 30;
  Volume3d out = simulate(t, p, cfg).final_state;
  Volume3d mirrored = orient(out, AxisTransform::mirror(0));
  CHECK((out.array() - mirrored.array()).abs().maxCoeff() <= 1e-5);
  CHECK(out.array().minCoeff() >= 0.0);
  CHECK(out.array().maxCoeff() <= 1.0 + 1e-4);
}

TEST_CASE("snapshots") {
  TissueMap t = uniform_tissue({6, 6, 6}, 1, 0, 0);
  GrowthParams p{0.1, 0.1, {0.5, 0.5, 0.5}};
  SimulationConfig cfg;
  cfg.t_end = 5;
  cfg.dt = 1;
  cfg.record_every = 2;
  auto r = simulate(t, p, cfg);
  REQUIRE(r.snapshots.size() == 4);
  CHECK(r.snapshots[0].first == 0);
  CHECK(r.snapshots[1].first == 2);
  CHECK(r.snapshots.back().first == 5);
  CHECK(r.snapshots.back().second == r.final_state);
}
