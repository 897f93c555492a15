#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tumornet/core/rng.hpp"
#include "tumornet/field/params.hpp"
#include "tumornet/field/transforms.hpp"
#include "tumornet/field/volume_io.hpp"

using namespace tumornet;
using namespace tumornet::field;

namespace {

Volume3f random_volume(const Dims& dims, std::uint64_t seed) {
  Rng rng(seed);
  Volume3f v(dims);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(uniform01(rng));
  return v;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "tumornet_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("center_of_mass") {
  Volume3f v({64, 64, 64});
  v(10, 20, 30) = 1.0f;
  auto c = center_of_mass(v);
  CHECK(c[0] == 10.0);
  CHECK(c[1] == 20.0);
  CHECK(c[2] == 30.0);

  Volume3f two({4, 2, 2});
  two(0, 0, 0) = 1.0f;
  two(2, 0, 0) = 1.0f;
  c = center_of_mass(two);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == 0.0);

  Volume3f weighted({5, 1, 1});
  weighted(0, 0, 0) = 1.0f;
  weighted(4, 0, 0) = 3.0f;
  CHECK(center_of_mass(weighted)[0] == doctest::Approx(3.0));

  Volume3f empty({3, 3, 3});
  try {
    center_of_mass(empty);
    FAIL("expected empty mass error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_mass);
  }
}

TEST_CASE("translate") {
  Volume3f v = random_volume({8, 8, 8}, 1);
  CHECK(translate(v, {0, 0, 0}) == v);

  Volume3f p({64, 64, 64});
  p(10, 20, 30) = 1.0f;
  Volume3f moved = translate(p, {22, 12, 2}, 0.0f);
  CHECK(moved(32, 32, 32) == 1.0f);
  CHECK(moved.array().sum() == 1.0f);

  Volume3f gone = translate(v, {9, 0, 0}, -1.0f);
  CHECK((gone.array() == -1.0f).all());
}

TEST_CASE("crop_center") {
  Volume3f v = random_volume({64, 64, 64}, 2);
  CHECK(crop_center(v, {64, 64, 64}) == v);

  Volume3f small = random_volume({4, 4, 4}, 3);
  Volume3f c = crop_center(small, {2, 2, 2});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) CHECK(c(x, y, z) == small(x + 1, y + 1, z + 1));

  CHECK_THROWS_AS(crop_center(v, {120, 120, 120}), Error);
  // Odd margins: the lower side gets the extra voxel.
  CHECK(crop_offset({5, 5, 5}, {2, 2, 2}) == Index3{2, 2, 2});
}

TEST_CASE("resize_trilinear") {
  Volume3f c({7, 5, 6}, 0.7f);
  Volume3f r = resize_trilinear(c, {11, 3, 4});
  CHECK((r.array() - 0.7f).abs().maxCoeff() < 1e-6f);

  Volume3f v = random_volume({6, 6, 6}, 4);
  CHECK((resize_trilinear(v, v.dims()).array() - v.array()).abs().maxCoeff() <= 1e-6f);

  Volume3f ramp({4, 2, 2});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 4; ++x) ramp(x, y, z) = static_cast<float>(x / 3.0);
  Volume3f down = resize_trilinear(ramp, {2, 2, 2});
  CHECK(down(0, 0, 0) == doctest::Approx(0.0));
  CHECK(down(1, 1, 1) == doctest::Approx(1.0));

  // Output stays inside the input range.
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    Volume3f in = random_volume({9, 7, 8}, seed);
    Volume3f out = resize_trilinear(in, {5 + static_cast<int>(seed % 7), 13, 4});
    CHECK(out.array().minCoeff() >= in.array().minCoeff() - 1e-6f);
    CHECK(out.array().maxCoeff() <= in.array().maxCoeff() + 1e-6f);
  }
}

TEST_CASE("orient") {
  Volume3f v = random_volume({6, 6, 6}, 5);
  CHECK(orient(v, AxisTransform::identity()) == v);

  Volume3f p({64, 64, 64});
  p(10, 20, 30) = 1.0f;
  CHECK(orient(p, AxisTransform::mirror(0))(53, 20, 30) == 1.0f);

  Volume3f r = v;
  for (int k = 0; k < 4; ++k) r = orient(r, AxisTransform::rot90(2));
  CHECK(r == v);
  CHECK(orient(v, AxisTransform::rot90(2)) != v);

  // Group law over all 48 symmetries.
  for (const auto& t : AxisTransform::all()) {
    CHECK(orient(orient(v, t), t.inverse()) == v);
    CHECK(AxisTransform::from_index(t.to_index()) == t);
    for (const auto& u : AxisTransform::all()) {
      if ((t.to_index() * 7 + u.to_index()) % 11 != 0) continue;
      CHECK(orient(orient(v, t), u) == orient(v, t.then(u)));
    }
  }

  Volume3f flat = random_volume({4, 6, 8}, 6);
  CHECK_THROWS_AS(orient(flat, AxisTransform::rot90(0)), Error);
  CHECK_NOTHROW(orient(flat, AxisTransform::mirror(1)));
}

TEST_CASE("normalized seed follows the voxel symmetry") {
  const AxisTransform t = AxisTransform::rot90(2).then(AxisTransform::mirror(1));
  const int n = 9;
  Volume3f v({n, n, n});
  v(2, 5, 7) = 1.0f;
  const Volume3f o = orient(v, t);
  const auto s = t.apply_normalized({2.0 / (n - 1), 5.0 / (n - 1), 7.0 / (n - 1)});
  CHECK(o(static_cast<int>(std::lround(s[0] * (n - 1))), static_cast<int>(std::lround(s[1] * (n - 1))),
          static_cast<int>(std::lround(s[2] * (n - 1)))) == 1.0f);
}

TEST_CASE("volume container round trip") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Volume3f v = random_volume({3 + static_cast<int>(seed), 4, 5}, seed);
    v.set_spacing(0.5 + seed);
    const auto path = temp_path("rt.vol");
    save_volume(path, v);
    Volume3f back = load_volume(path);
    CHECK(back.dims() == v.dims());
    CHECK(back.spacing() == v.spacing());
    CHECK(std::memcmp(back.data(), v.data(), v.size() * sizeof(float)) == 0);
  }

  TissueMap t{random_volume({4, 4, 4}, 1), random_volume({4, 4, 4}, 2), random_volume({4, 4, 4}, 3)};
  save_tissue(temp_path("t.vol"), t);
  CHECK(load_tissue(temp_path("t.vol")) == t);
  CHECK_THROWS_AS(load_volume(temp_path("t.vol")), Error);
}

TEST_CASE("volume container errors") {
  auto expect_code = [](const std::filesystem::path& p, ErrorCode code) {
    try {
      load_volume(p);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };

  const auto short_payload = temp_path("short.vol");
  write_container(short_payload, kVolumeMagic,
                  {{"channels", {"value"}}, {"dims", {2, 2, 2}}, {"dtype", "f32le"}, {"spacing", 1.0}},
                  std::vector<float>(7, 1.0f));
  expect_code(short_payload, ErrorCode::payload_size_mismatch);

  const auto bad_magic = temp_path("magic.vol");
  write_container(bad_magic, "SOMETHING-ELSE 1", {{"dims", {1, 1, 1}}}, {1.0f});
  expect_code(bad_magic, ErrorCode::not_a_container);

  const auto bad_header = temp_path("header.vol");
  {
    std::ofstream out(bad_header, std::ios::binary);
    std::string line = kVolumeMagic;
    line.resize(63, ' ');
    out << line << '\n' << "{not json\n";
  }
  expect_code(bad_header, ErrorCode::malformed_header);

  const auto ragged = temp_path("ragged.vol");
  save_volume(ragged, Volume3f({2, 2, 2}, 1.0f));
  std::filesystem::resize_file(ragged, std::filesystem::file_size(ragged) - 2);
  expect_code(ragged, ErrorCode::truncated_payload);
}

TEST_CASE("normalize_params") {
  ParamRanges r;
  r.rho = {0.05, 0.15};
  r.d_w = {0.02, 0.5};
  GrowthParams lo{0.05, 0.02, {0, 0, 0}};
  GrowthParams hi{0.15, 0.5, {1, 1, 1}};
  for (double v : normalize_params(lo, r)) CHECK(v == doctest::Approx(0.0));
  for (double v : normalize_params(hi, r)) CHECK(v == doctest::Approx(1.0));
  GrowthParams mid{0.10, 0.1, {0.3, 0.6, 0.9}};
  CHECK(normalize_params(mid, r)[0] == doctest::Approx(0.5));

  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    GrowthParams p{uniform(rng, 0.05, 0.15), uniform(rng, 0.02, 0.5), {uniform01(rng), uniform01(rng), uniform01(rng)}};
    const auto back = to_array(denormalize_params(normalize_params(p, r), r));
    const auto orig = to_array(p);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(back[i] - orig[i]) <= 1e-6);
  }

  ParamRanges degenerate = r;
  degenerate.rho = {0.1, 0.1};
  try {
    normalize_params(mid, degenerate);
    FAIL("expected degenerate range error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_range);
  }
}
