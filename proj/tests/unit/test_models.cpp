#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tumornet/models/model.hpp"
#include "tumornet/nn/gradcheck.hpp"
#include "tumornet/nn/ops.hpp"

using namespace tumornet;
using namespace tumornet::models;
using nn::Shape;
using nn::TensorD;
using nn::TensorF;

namespace {

template <typename T>
nn::Tensor<T> random_input(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  nn::Tensor<T> t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

// Row b of a batched tensor as a batch of one.
template <typename T>
nn::Tensor<T> row(const nn::Tensor<T>& x, int b) {
  return nn::slice(x, 0, b, 1);
}

double max_abs_diff(const TensorF& a, const TensorF& b) {
  return static_cast<double>((a.value() - b.value()).abs().maxCoeff());
}

ModelConfig small_vit() {
  ModelConfig c;
  c.arch = Arch::vit3d;
  c.vit.input = 8;
  c.vit.patch = 4;
  c.vit.dim = 8;
  c.vit.depth = 2;
  c.vit.heads = 2;
  c.vit.init = nn::InitKind::kaiming_normal;
  return c;
}

}  // namespace

TEST_CASE("TS desk preset: output shape, range and parameter count") {
  auto m = build_model<float>(preset_model(Arch::tumorsurrogate, Preset::desk), 1);
  m->train();
  const auto out = m->forward(random_input<float>({1, 3, 32, 32, 32}, 2), random_input<float>({1, 5}, 3));
  CHECK(out.shape() == Shape{1, 1, 32, 32, 32});
  CHECK(out.value().minCoeff() >= 0.0f);
  CHECK(out.value().maxCoeff() <= 1.0f);
  CHECK(m->parameter_count() == 611081);
  CHECK(build_model<float>(preset_model(Arch::tumorsurrogate, Preset::desk), 99)->parameter_count() == 611081);
}

TEST_CASE("TS conditioning: different theta gives different outputs") {
  auto m = build_model<float>(preset_model(Arch::tumorsurrogate, Preset::desk), 4);
  m->train();
  const auto tissue = random_input<float>({1, 3, 32, 32, 32}, 5);
  m->forward(tissue, random_input<float>({1, 5}, 6));
  m->eval();
  const auto a = m->forward(tissue, TensorF::from({1, 5}, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f}));
  const auto b = m->forward(tissue, TensorF::from({1, 5}, {0.9f, 0.8f, 0.7f, 0.6f, 0.5f}));
  CHECK(max_abs_diff(a, b) > 0.0);
}

TEST_CASE("UNet desk preset: main and auxiliary head shapes") {
  const auto cfg = preset_model(Arch::unet_reg, Preset::desk);
  double s = 0;
  for (double w : cfg.unet.ds_weights) s += w;
  CHECK(s == doctest::Approx(1.0));
  auto m = build_model<float>(cfg, 1);
  m->train();
  const auto out = m->forward_all(random_input<float>({1, 3, 32, 32, 32}, 2), random_input<float>({1, 5}, 3));
  CHECK(out.main.shape() == Shape{1, 1, 32, 32, 32});
  REQUIRE(out.aux.size() == 2);
  CHECK(out.aux[0].shape() == Shape{1, 1, 16, 16, 16});
  CHECK(out.aux[1].shape() == Shape{1, 1, 8, 8, 8});

  auto single = cfg;
  single.unet.deep_supervision = false;
  auto m1 = build_model<float>(single, 1);
  m1->train();
  CHECK(m1->forward_all(random_input<float>({1, 3, 32, 32, 32}, 2), random_input<float>({1, 5}, 3)).aux.empty());
}

TEST_CASE("ViT token counts and paper preset audit") {
  auto desk = build_model<float>(preset_model(Arch::vit3d, Preset::desk), 1);
  auto& vd = dynamic_cast<ViT3d<float>&>(*desk);
  CHECK(vd.token_count() == 65);
  const auto out = desk->forward(random_input<float>({1, 3, 32, 32, 32}, 2), random_input<float>({1, 5}, 3));
  CHECK(out.shape() == Shape{1, 1, 32, 32, 32});

  const auto paper_cfg = preset_model(Arch::vit3d, Preset::paper);
  CHECK(paper_cfg.vit.input == 64);
  CHECK(paper_cfg.vit.patch == 16);
  CHECK(paper_cfg.vit.mlp_ratio == 4.0);
  auto paper = build_model<float>(paper_cfg, 1);
  auto& vp = dynamic_cast<ViT3d<float>&>(*paper);
  CHECK(vp.token_count() == 65);
  CHECK(vp.block_count() == 12);
  CHECK(vp.head_count() == 6);
  CHECK(vp.positional().shape() == Shape{1, 64, 384});
}

TEST_CASE("ViT patchify and unpatchify are inverse on one channel") {
  ViT3d<double> m(small_vit(), 1);
  const auto x = random_input<double>({2, 1, 8, 8, 8}, 3);
  const auto p = m.patchify(nn::concat<double>({x, x, x}, 1));
  CHECK(p.shape() == Shape{2, 8, 192});
  const auto back = m.unpatchify(nn::slice(p, 2, 0, 64));
  CHECK((back.value() - x.value()).abs().maxCoeff() == 0.0);
  // Patch (gz, gy, gx) = (0, 0, 1) starts at voxel x = 4.
  CHECK(p.value()[1 * 192] == x.value()[4]);
}

TEST_CASE("ViT token permutation with positional embeddings leaves output unchanged") {
  ViT3d<double> m(small_vit(), 7);
  m.eval();
  const auto tissue = random_input<double>({1, 3, 8, 8, 8}, 8);
  const auto theta = random_input<double>({1, 5}, 9);
  const auto patches = m.patchify(tissue);
  const int N = patches.dim(1);
  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[3]);
  auto permute_rows = [&](const TensorD& t) {
    std::vector<TensorD> rows;
    for (int i : perm) rows.push_back(nn::slice(t, 1, i, 1));
    return nn::concat<double>(rows, 1);
  };
  const auto ref = m.decode(m.run_tokens(m.embed(patches, m.positional()), theta));
  const auto got = m.decode(m.run_tokens(m.embed(permute_rows(patches), permute_rows(m.positional())), theta));
  double err = 0;
  for (int i = 0; i < N; ++i) {
    err = std::max(err, (nn::slice(got, 1, i, 1).value() - nn::slice(ref, 1, perm[i], 1).value()).abs().maxCoeff());
  }
  CHECK(err <= 1e-5);
}

TEST_CASE("eval mode: identical batch rows agree and companions do not leak") {
  for (auto arch : {Arch::tumorsurrogate, Arch::unet_reg, Arch::vit3d}) {
    CAPTURE(to_string(arch));
    auto m = build_model<float>(preset_model(arch, Preset::desk), 11);
    m->train();
    m->forward(random_input<float>({2, 3, 32, 32, 32}, 12), random_input<float>({2, 5}, 13));
    m->eval();
    const auto tissue = random_input<float>({2, 3, 32, 32, 32}, 14);
    const auto theta = random_input<float>({2, 5}, 15);
    const auto pair = m->forward(tissue, theta);
    const auto alone = m->forward(row(tissue, 0), row(theta, 0));
    CHECK(max_abs_diff(row(pair, 0), alone) <= 1e-5);

    const auto twin_t = nn::concat<float>({row(tissue, 1), row(tissue, 1)}, 0);
    const auto twin_p = nn::concat<float>({row(theta, 1), row(theta, 1)}, 0);
    const auto twins = m->forward(twin_t, twin_p);
    CHECK(max_abs_diff(row(twins, 0), row(twins, 1)) == 0.0);
    CHECK(twins.value().minCoeff() >= 0.0f);
    CHECK(twins.value().maxCoeff() <= 1.0f);
  }
}

TEST_CASE("BN models refuse eval before any training-mode forward") {
  auto m = build_model<float>(preset_model(Arch::tumorsurrogate, Preset::desk), 1);
  m->eval();
  try {
    m->forward(random_input<float>({1, 3, 32, 32, 32}, 2), random_input<float>({1, 5}, 3));
    FAIL("expected uninitialized_stats");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::uninitialized_stats);
  }
}

TEST_CASE("gradient flow: every parameter and theta receive gradient") {
  for (auto arch : {Arch::tumorsurrogate, Arch::unet_reg, Arch::vit3d}) {
    CAPTURE(to_string(arch));
    auto m = build_model<float>(preset_model(arch, Preset::desk), 21);
    m->train();
    auto theta = random_input<float>({1, 5}, 23);
    theta.set_requires_grad(true);
    const auto tissue = random_input<float>({1, 3, 32, 32, 32}, 22);
    const auto target = random_input<float>({1, 1, 32, 32, 32}, 24);
    nn::Tape<float> tape;
    {
      nn::TapeScope<float> scope(tape);
      const auto out = m->forward_all(tissue, theta);
      auto loss = nn::mse_loss(out.main, target);
      for (const auto& a : out.aux) loss = nn::add(loss, nn::mse_loss(a, nn::Tensor<float>(a.shape(), 0.5f)));
      tape.backward(loss);
    }
    for (const auto& [name, p] : m->parameters()) {
      CAPTURE(name);
      REQUIRE(p.has_grad());
      CHECK(p.grad().abs().maxCoeff() > 0.0f);
    }
    REQUIRE(theta.has_grad());
    CHECK(theta.grad().abs().maxCoeff() > 0.0f);
  }
}

TEST_CASE("model configs: divisibility and input validation") {
  auto ts = preset_model(Arch::tumorsurrogate, Preset::desk);
  ts.ts.input = 36;
  CHECK_THROWS_AS(ts.validate(), Error);
  auto unet = preset_model(Arch::unet_reg, Preset::desk);
  unet.unet.input = 20;
  CHECK_THROWS_AS(build_model<float>(unet, 1), Error);
  auto vit = preset_model(Arch::vit3d, Preset::desk);
  vit.vit.input = 30;
  CHECK_THROWS_AS(build_model<float>(vit, 1), Error);
  vit = preset_model(Arch::vit3d, Preset::desk);
  vit.vit.heads = 3;
  try {
    build_model<float>(vit, 1);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }

  auto m = build_model<float>(small_vit(), 1);
  CHECK_THROWS_AS(m->forward(random_input<float>({1, 3, 16, 16, 16}, 1), random_input<float>({1, 5}, 2)), Error);
  CHECK_THROWS_AS(m->forward(random_input<float>({1, 2, 8, 8, 8}, 1), random_input<float>({1, 5}, 2)), Error);
  CHECK_THROWS_AS(m->forward(random_input<float>({2, 3, 8, 8, 8}, 1), random_input<float>({1, 5}, 2)), Error);
  try {
    m->forward(random_input<float>({1, 3, 8, 8, 8}, 1), TensorF::from({1, 5}, {0.5f, 0.5f, 1.5f, 0.5f, 0.5f}));
    FAIL("expected invalid_argument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
}

TEST_CASE("model config JSON round trip and strictness") {
  for (auto arch : {Arch::tumorsurrogate, Arch::unet_reg, Arch::vit3d}) {
    for (auto p : {Preset::desk, Preset::paper}) {
      const auto c = preset_model(arch, p);
      const nlohmann::json j = c;
      const auto back = j.get<ModelConfig>();
      CHECK(nlohmann::json(back) == j);
    }
  }
  const auto j = nlohmann::json::parse(R"({"arch": "ts", "preset": "desk", "config": {"channels": [8, 16]}})");
  const auto c = j.get<ModelConfig>();
  CHECK(c.arch == Arch::tumorsurrogate);
  CHECK(c.ts.channels == std::vector<int>{8, 16});
  CHECK(c.ts.head_channels == 8);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"arch": "ts", "config": {"chanels": [8]}})").get<ModelConfig>(), Error);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"arch": "resnet"})").get<ModelConfig>(), Error);
  CHECK(ts_baseline(Preset::desk).ts.batch_norm == false);
}
