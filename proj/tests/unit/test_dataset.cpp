#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "tumornet/core/rng.hpp"
#include "tumornet/dataset/generate.hpp"
#include "tumornet/dataset/phantom.hpp"
#include "tumornet/dataset/preprocess.hpp"
#include "tumornet/dataset/sampling.hpp"
#include "tumornet/field/volume_io.hpp"
#include "tumornet/pde/solver.hpp"

using namespace tumornet;
using namespace tumornet::field;
using namespace tumornet::dataset;

namespace fs = std::filesystem;

namespace {

PhantomSpec small_spec(int n) {
  PhantomSpec s;
  s.dims = {n, n, n};
  return s;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tumornet_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("gen_phantom determinism and geometry") {
  const auto spec = small_spec(32);
  const auto a = gen_phantom(spec, 7);
  const auto b = gen_phantom(spec, 7);
  CHECK(a == b);
  CHECK_FALSE(a == gen_phantom(spec, 8));
  CHECK_NOTHROW(a.validate());
  CHECK(white_matter_components(a) == 1);
  for (int z : {0, 31})
    for (int y : {0, 31})
      for (int x : {0, 31}) {
        CHECK(a.wm(x, y, z) == 0.0f);
        CHECK(a.gm(x, y, z) == 0.0f);
        CHECK(a.csf(x, y, z) == 0.0f);
      }
}

TEST_CASE("gen_phantom without wobble is left-right symmetric") {
  auto spec = small_spec(32);
  spec.wobble = 0.0;
  const auto t = gen_phantom(spec, 3);
  const auto m = AxisTransform::mirror(0);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    worst = std::max(worst, static_cast<double>((orient(t.channel(c), m).array() - t.channel(c).array()).abs().maxCoeff()));
  }
  CHECK(worst <= 1e-6);
  CHECK(gen_phantom(spec, 3) == gen_phantom(spec, 4));
}

TEST_CASE("gen_phantom rejects geometry without white matter") {
  auto spec = small_spec(24);
  spec.brain_axes = {0.2, 0.2, 0.2};
  spec.cortex_thickness = 6.0;
  CHECK_THROWS_AS(gen_phantom(spec, 1), Error);
}

TEST_CASE("sample_params statistics") {
  // Small block of white matter keeps the 10^4 draws cheap.
  TissueMap block{Volume3f({9, 9, 9}, 0.0f), Volume3f({9, 9, 9}, 0.0f), Volume3f({9, 9, 9}, 0.0f)};
  for (int z = 1; z < 8; ++z)
    for (int y = 1; y < 8; ++y)
      for (int x = 1; x < 8; ++x) block.wm(x, y, z) = 1.0f;
  ParamRanges r;
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_params(r, block, derive_seed(99, i)).rho;
  // Uniform on [a,b]: sd = (b-a)/sqrt(12).
  const double se = (r.rho.hi - r.rho.lo) / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n - 0.10) <= 3 * se);

  const auto t = gen_phantom(small_spec(32), 1);

  for (int i = 0; i < 200; ++i) {
    const auto p = sample_params(r, t, derive_seed(5, i));
    const auto v = pde::seed_voxel(t.dims(), p.seed);
    CHECK(t.wm(v[0], v[1], v[2]) > 0.5f);
    CHECK(p.d_w >= r.d_w.lo);
    CHECK(p.d_w <= r.d_w.hi);
  }
  CHECK(sample_params(r, t, 11) == sample_params(r, t, 11));
}

TEST_CASE("sample_params collapsed ranges") {
  const auto t = gen_phantom(small_spec(32), 1);
  ParamRanges r;
  r.rho = {0.1, 0.1 + 1e-12};
  r.d_w = {0.3, 0.3 + 1e-12};
  const auto p = sample_params(r, t, 3);
  CHECK(p.rho == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(p.d_w == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("sample_params without eligible seeds") {
  TissueMap t{Volume3f({8, 8, 8}, 0.0f), Volume3f({8, 8, 8}, 1.0f), Volume3f({8, 8, 8}, 0.0f)};
  try {
    sample_params(ParamRanges{}, t, 1);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_eligible_seed);
  }
}

TEST_CASE("preprocess shift") {
  const Dims d{64, 64, 64};
  TissueMap t{Volume3f(d, 0.5f), Volume3f(d, 0.25f), Volume3f(d, 0.0f)};
  Volume3f tumor(d, 0.0f);
  tumor(10, 20, 30) = 1.0f;
  const auto pre = preprocess(t, tumor, {56, 56, 56}, {32, 32, 32});
  CHECK(pre.provenance.shift == Index3{22, 12, 2});
  CHECK(pre.tumor.dims() == Dims{32, 32, 32});

  Volume3f centered(d, 0.0f);
  centered(32, 32, 32) = 1.0f;
  CHECK(preprocess(t, centered, {56, 56, 56}, {32, 32, 32}).provenance.shift == Index3{0, 0, 0});

  Volume3f empty(d, 0.0f);
  CHECK_THROWS_AS(preprocess(t, empty, {56, 56, 56}, {32, 32, 32}), Error);
}

TEST_CASE("preprocess identity resize and provenance round trip") {
  const auto tissue = gen_phantom(small_spec(32), 2);
  const auto p = sample_params(ParamRanges{}, tissue, 4);
  pde::SimulationConfig cfg;
  cfg.t_end = 30;
  const Volume3f tumor = pde::simulate(tissue, p, cfg).final_state.cast<float>();

  const auto pre = preprocess(tissue, tumor, {32, 32, 32}, {32, 32, 32});
  const Volume3f shifted = translate(tumor, pre.provenance.shift, 0.0f);
  CHECK((pre.tumor.array() - shifted.array()).abs().maxCoeff() <= 1e-6f);

  const Volume3f back = restore_frame(pre.tumor, pre.provenance);
  // The shift may push mass off the grid; what survives must land back in place.
  const Volume3f survived = translate(shifted, {-pre.provenance.shift[0], -pre.provenance.shift[1], -pre.provenance.shift[2]}, 0.0f);
  CHECK((back.array() - survived.array()).abs().maxCoeff() <= 1e-6f);

  const auto cropped = preprocess(tissue, tumor, {28, 28, 28}, {28, 28, 28});
  const Volume3f back2 = restore_frame(cropped.tumor, cropped.provenance);
  const auto& pr = cropped.provenance;
  for (int z = 0; z < 28; ++z)
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        const int sx = x + pr.crop_offset[0] - pr.shift[0];
        const int sy = y + pr.crop_offset[1] - pr.shift[1];
        const int sz = z + pr.crop_offset[2] - pr.shift[2];
        if (!tumor.contains(sx, sy, sz)) continue;
        CHECK(back2(sx, sy, sz) == doctest::Approx(tumor(sx, sy, sz)).epsilon(1e-6));
      }
}

TEST_CASE("seed_to_model_frame follows the preprocessing") {
  Provenance p;
  p.source_dims = {64, 64, 64};
  p.shift = {22, 12, 2};
  p.crop_dims = {56, 56, 56};
  p.crop_offset = crop_offset(p.source_dims, p.crop_dims);
  p.out_dims = {32, 32, 32};
  const std::array<double, 3> seed{10.0 / 63, 20.0 / 63, 30.0 / 63};
  const auto s = seed_to_model_frame(seed, p);
  for (int a = 0; a < 3; ++a) CHECK(s[a] * 55 == doctest::Approx(32.0 - p.crop_offset[a]));
}

TEST_CASE("augment") {
  const Dims d{8, 8, 8};
  Sample s{TissueMap{Volume3f(d, 0.6f), Volume3f(d, 0.3f), Volume3f(d, 0.0f)}, Volume3f(d, 0.0f),
           GrowthParams{0.1, 0.2, {0.3, 0.5, 0.5}}};
  s.tumor(1, 2, 3) = 0.5f;
  const auto id = augment(s, AxisTransform::identity());
  CHECK(id.tumor == s.tumor);
  CHECK(id.tissue == s.tissue);
  CHECK(id.params == s.params);

  const auto m = augment(s, AxisTransform::mirror(0));
  CHECK(m.params.seed[0] == doctest::Approx(0.7));
  CHECK(m.params.seed[1] == doctest::Approx(0.5));
  CHECK(m.params.rho == s.params.rho);
  CHECK(m.params.d_w == s.params.d_w);
  CHECK(m.tumor(6, 2, 3) == 0.5f);
}

TEST_CASE("solver equivariance under all 48 symmetries") {
  auto spec = small_spec(16);
  spec.brain_axes = {0.9, 0.9, 0.9};
  spec.cortex_thickness = 2.0;
  spec.csf_rim = 1.0;
  const auto tissue = gen_phantom(spec, 5);
  auto p = sample_params(ParamRanges{}, tissue, 17);
  p.d_w = 0.3;
  pde::SimulationConfig cfg;
  cfg.t_end = 15;
  const Volume3f base = pde::simulate(tissue, p, cfg).final_state.cast<float>();
  Sample s{tissue, base, p};
  double worst = 0.0;
  for (const auto& t : AxisTransform::all()) {
    const auto a = augment(s, t);
    const Volume3f sim = pde::simulate(a.tissue, a.params, cfg).final_state.cast<float>();
    worst = std::max(worst, static_cast<double>((sim.array() - a.tumor.array()).abs().maxCoeff()));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("generate_dataset is reproducible") {
  auto spec = small_spec(24);
  pde::SimulationConfig cfg;
  cfg.t_end = 40;
  GenerateOptions opts;
  opts.name = "tiny";
  opts.work_dims = {20, 20, 20};
  opts.out_dims = {12, 12, 12};
  const auto dir_a = scratch("gen_a");
  const auto dir_b = scratch("gen_b");
  const auto m = generate_dataset(2, 1, 1, spec, ParamRanges{}, cfg, 1234, dir_a, opts);
  generate_dataset(2, 1, 1, spec, ParamRanges{}, cfg, 1234, dir_b, opts);

  const auto ta = read_tree(dir_a);
  const auto tb = read_tree(dir_b);
  CHECK(ta.size() == 1 + 4 * 3);
  CHECK(ta == tb);

  CHECK(m.n_train == 2);
  CHECK(m.split(Split::train).size() == 2);
  CHECK(m.split(Split::val).size() == 1);
  CHECK(m.split(Split::test).size() == 1);
  std::set<std::string> ids;
  for (const auto& r : m.samples) ids.insert(r.id);
  CHECK(ids.size() == 4);

  const auto loaded = load_manifest(dir_a);
  CHECK(loaded.samples.size() == 4);
  for (const auto& r : loaded.samples) {
    const auto s = load_sample(loaded, r);
    const float mx = s.target.array().maxCoeff();
    CHECK(mx > 0.0f);
    CHECK(mx <= 1.0f);
    CHECK(s.target.dims() == Dims{12, 12, 12});
    CHECK(s.tissue.dims() == Dims{12, 12, 12});
    for (double v : r.theta_norm) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const auto g = generate_sample(spec, loaded.ranges, loaded.simulation, r.phantom_seed, r.param_seed,
                                   loaded.work_dims, loaded.out_dims);
    CHECK(g.pre.tumor == s.target);
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("load_manifest errors") {
  const auto dir = scratch("missing");
  try {
    load_manifest(dir);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(category_of(e.code()) == ErrorCategory::data);
  }
}
