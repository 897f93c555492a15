#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tumornet/field/transforms.hpp"
#include "tumornet/models/train.hpp"

using namespace tumornet;
using namespace tumornet::models;
namespace fs = std::filesystem;

namespace {

MemorySplit toy_split(int count, std::uint64_t seed) {
  Rng rng(seed);
  MemorySplit s;
  const int n = 8;
  for (int i = 0; i < count; ++i) {
    MemorySample m;
    m.id = "t" + std::to_string(i);
    m.n = n;
    m.tissue.resize(3 * n * n * n);
    m.target.resize(n * n * n);
    for (auto& v : m.tissue) v = static_cast<float>(uniform01(rng));
    for (auto& v : m.target) v = static_cast<float>(0.3 * uniform01(rng));
    for (auto& v : m.theta) v = uniform01(rng);
    s.samples.push_back(std::move(m));
  }
  return s;
}

TrainConfig toy_config() {
  auto c = preset_training(Arch::tumorsurrogate, Preset::desk);
  c.model.ts.input = 8;
  c.model.ts.channels = {2, 3};
  c.model.ts.param_channels = 2;
  c.model.ts.head_channels = 2;
  c.epochs = 3;
  c.batch_size = 2;
  c.seed = 5;
  return c;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("tumornet_train_" + name);
  fs::remove_all(d);
  return d;
}

int csv_rows(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  int rows = -1;
  while (std::getline(f, line)) ++rows;
  return rows;
}

}  // namespace

TEST_CASE("training presets survive a JSON round trip") {
  for (auto arch : {Arch::tumorsurrogate, Arch::unet_reg, Arch::vit3d})
    for (auto preset : {Preset::desk, Preset::paper})
      for (bool baseline : {false, true}) {
        if (baseline && arch != Arch::tumorsurrogate) continue;
        const auto c = preset_training(arch, preset, baseline);
        const nlohmann::json j = c;
        CHECK(nlohmann::json(j.get<TrainConfig>()) == j);
      }
}

TEST_CASE("train: log rows, checkpoints and seed determinism") {
  const auto train_set = toy_split(4, 1), val = toy_split(2, 2);
  const auto cfg = toy_config();
  const auto a = train(cfg, train_set, val, scratch("a"));
  CHECK(a.steps == 6);
  CHECK(a.log.size() == 3);
  CHECK(csv_rows(a.log_csv) == 3);
  CHECK(fs::exists(a.best_checkpoint));
  CHECK(fs::exists(a.last_checkpoint));
  for (const auto& e : a.log) CHECK(std::isfinite(e.val_mse));

  const auto b = train(cfg, train_set, val, scratch("b"));
  CHECK(b.log.back().train_mse == a.log.back().train_mse);
  CHECK(b.log.back().val_mse == a.log.back().val_mse);

  auto other = cfg;
  other.seed = 6;
  CHECK(train(other, train_set, val, scratch("c")).log.back().train_mse != a.log.back().train_mse);

  auto capped = cfg;
  capped.max_steps = 4;
  CHECK(train(capped, train_set, val, scratch("d")).steps == 4);
  for (const char* d : {"a", "b", "c", "d"}) fs::remove_all(scratch(d));
}

TEST_CASE("train aborts on a non-finite loss and names the step") {
  auto cfg = toy_config();
  cfg.optimizer.grad_clip_norm.reset();
  cfg.optimizer.kind = nn::OptimizerConfig::Kind::sgd_nesterov;
  cfg.schedule.kind = nn::ScheduleSpec::Kind::constant;
  cfg.schedule.eta_max = 1e30;
  try {
    train(cfg, toy_split(4, 1), {}, scratch("nan"));
    FAIL("expected a numerical blow-up");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical_blowup);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  fs::remove_all(scratch("nan"));
}

TEST_CASE("region mask dilates by a cube and clips at the border") {
  nn::TensorF t(nn::Shape{1, 1, 6, 6, 6});
  t.data()[(2 * 6 + 2) * 6 + 2] = 0.5f;  // interior voxel
  t.data()[0] = 0.5f;                     // corner voxel
  const auto m = region_mask(t, 0.001f, 1);
  double total = 0;
  for (std::int64_t i = 0; i < m.numel(); ++i) total += m.data()[i];
  // 27 around the interior voxel, 8 around the corner, overlapping in (1,1,1).
  CHECK(total == 27 + 8 - 1);
  CHECK(region_mask(t, 0.6f, 2).value().sum() == 0.0f);
}

TEST_CASE("transform_sample: mirror moves the seed and is an involution") {
  const auto s = toy_split(1, 3).samples[0];
  field::ParamRanges r;
  const auto t = field::AxisTransform::mirror(1);
  const auto once = transform_sample(s, t, r);
  CHECK(once.theta[0] == s.theta[0]);
  CHECK(once.theta[1] == s.theta[1]);
  CHECK(once.theta[2] == s.theta[2]);
  CHECK(once.theta[3] == doctest::Approx(1.0 - s.theta[3]));
  CHECK(once.target != s.target);
  const auto twice = transform_sample(once, t, r);
  CHECK(twice.tissue == s.tissue);
  CHECK(twice.target == s.target);
  CHECK(twice.theta[3] == doctest::Approx(s.theta[3]));
}
