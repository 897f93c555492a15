#include <unistd.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tumornet/calibrate/calibrate.hpp"
#include "tumornet/cli/cli.hpp"
#include "tumornet/dataset/generate.hpp"
#include "tumornet/dataset/phantom.hpp"
#include "tumornet/dataset/sampling.hpp"
#include "tumornet/eval/report.hpp"
#include "tumornet/field/transforms.hpp"
#include "tumornet/field/volume_io.hpp"
#include "tumornet/models/train.hpp"
#include "tumornet/nn/layers.hpp"
#include "tumornet/nn/ops.hpp"
#include "tumornet/pde/solver.hpp"

namespace tumornet::cli {

namespace fs = std::filesystem;
using field::Dims;
using field::Volume3d;
using field::Volume3f;
using nn::Shape;
using nn::TensorD;

namespace {

class Runner {
 public:
  void check(const std::string& module, const std::string& name, const std::function<bool(std::string&)>& fn) {
    SelftestCheck c{module, name, false, {}};
    try {
      c.pass = fn(c.detail);
    } catch (const std::exception& e) {
      c.detail = std::string("threw: ") + e.what();
    }
    out.push_back(std::move(c));
  }
  void expect_error(const std::string& module, const std::string& name, ErrorCode code,
                    const std::function<void()>& fn) {
    check(module, name, [&](std::string& d) {
      try {
        fn();
      } catch (const Error& e) {
        if (e.code() == code) return true;
        d = std::string("wrong error: ") + e.what();
        return false;
      }
      d = "no error";
      return false;
    });
  }
  std::vector<SelftestCheck> out;
};

template <typename T = double>
nn::Tensor<T> rand_t(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor<T> t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

bool near(double a, double b, double tol, std::string& d) {
  if (std::abs(a - b) <= tol) return true;
  d = "got " + num(a) + ", expected " + num(b);
  return false;
}

Volume3f ramp(const Dims& d) {
  Volume3f v(d);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>((i * 37 % 101) / 101.0);
  return v;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

dataset::PhantomSpec small_phantom(int n) {
  dataset::PhantomSpec s;
  s.dims = {n, n, n};
  return s;
}

field::TissueMap uniform_tissue(const Dims& d, float wm, float gm, float csf) {
  return {Volume3f(d, wm), Volume3f(d, gm), Volume3f(d, csf)};
}

void field_checks(Runner& r, const fs::path& tmp) {
  const std::string m = "field";
  r.check(m, "centre of mass of a point mass", [](std::string& d) {
    Volume3f v(Dims{40, 40, 40});
    v(10, 20, 30) = 1.0f;
    const auto c = field::center_of_mass(v);
    return near(c[0], 10, 0, d) && near(c[1], 20, 0, d) && near(c[2], 30, 0, d);
  });
  r.check(m, "centre of mass of two equal voxels", [](std::string& d) {
    Volume3f v(Dims{4, 4, 4});
    v(0, 0, 0) = v(2, 0, 0) = 1.0f;
    const auto c = field::center_of_mass(v);
    return near(c[0], 1, 0, d) && near(c[1], 0, 0, d) && near(c[2], 0, 0, d);
  });
  r.check(m, "zero shift is the identity", [](std::string&) {
    const auto v = ramp({6, 5, 4});
    return field::translate(v, {0, 0, 0}) == v;
  });
  r.check(m, "shift beyond the extent gives the fill value", [](std::string&) {
    const auto t = field::translate(ramp({6, 5, 4}), {100, 0, 0}, 0.25f);
    return (t.array() == 0.25f).all();
  });
  r.check(m, "full-size centred crop is the identity", [](std::string&) {
    const auto v = ramp({64, 64, 64});
    return field::crop_center(v, {64, 64, 64}) == v;
  });
  r.expect_error(m, "crop larger than the volume is rejected", ErrorCode::invalid_argument,
                 [] { field::crop_center(ramp({64, 64, 64}), {120, 120, 120}); });
  r.check(m, "resizing a constant volume stays constant", [](std::string& d) {
    const auto o = field::resize_trilinear(Volume3f(Dims{9, 7, 5}, 0.7f), {16, 12, 20});
    return near(o.array().minCoeff(), 0.7, 1e-6, d) && near(o.array().maxCoeff(), 0.7, 1e-6, d);
  });
  r.check(m, "resize to the same dims is the identity", [](std::string& d) {
    const auto v = ramp({8, 8, 8});
    return near((field::resize_trilinear(v, v.dims()).array() - v.array()).abs().maxCoeff(), 0, 1e-6, d);
  });
  r.check(m, "identity orientation", [](std::string&) {
    const auto v = ramp({5, 5, 5});
    return field::orient(v, field::AxisTransform::identity()) == v;
  });
  r.check(m, "four quarter turns about z", [](std::string&) {
    const auto v = ramp({5, 5, 5});
    auto w = v;
    for (int i = 0; i < 4; ++i) w = field::orient(w, field::AxisTransform::rot90(2));
    return w == v;
  });
  r.check(m, "volume container round trip is byte exact", [&](std::string&) {
    const auto v = ramp({7, 6, 5});
    field::save_volume(tmp / "a.vol", v);
    const auto w = field::load_volume(tmp / "a.vol");
    field::save_volume(tmp / "b.vol", w);
    return w == v && read_tree(tmp)["a.vol"] == read_tree(tmp)["b.vol"];
  });
  r.expect_error(m, "payload shorter than the header dims", ErrorCode::payload_size_mismatch, [&] {
    field::write_container(tmp / "short.vol", field::kVolumeMagic,
                           {{"channels", {"value"}}, {"dims", {2, 2, 2}}, {"dtype", "f32le"}, {"spacing", 1.0}},
                           std::vector<float>(7, 0.0f));
    field::load_volume(tmp / "short.vol");
  });
  r.expect_error(m, "wrong magic string", ErrorCode::not_a_container, [&] {
    std::ofstream(tmp / "bad.vol") << "NOT-A-VOLUME\n{}\n";
    field::load_volume(tmp / "bad.vol");
  });
  r.check(m, "normalizing the range bounds", [](std::string&) {
    const field::ParamRanges pr;
    const auto lo = field::normalize_params({pr.rho.lo, pr.d_w.lo, {pr.x.lo, pr.y.lo, pr.z.lo}}, pr);
    const auto hi = field::normalize_params({pr.rho.hi, pr.d_w.hi, {pr.x.hi, pr.y.hi, pr.z.hi}}, pr);
    return lo == field::NormalizedParams{0, 0, 0, 0, 0} && hi == field::NormalizedParams{1, 1, 1, 1, 1};
  });
}

void pde_checks(Runner& r) {
  const std::string m = "pde_solver";
  r.check(m, "pure white matter diffusivity", [](std::string& d) {
    const auto f = pde::build_diffusion_field(uniform_tissue({4, 4, 4}, 1, 0, 0), {0.1, 0.2, {0.5, 0.5, 0.5}}, {});
    return near(f.d.array().minCoeff(), 0.2, 1e-12, d) && near(f.d.array().maxCoeff(), 0.2, 1e-12, d);
  });
  r.expect_error(m, "seed in pure CSF is rejected", ErrorCode::seed_outside_tissue,
                 [] { pde::seed_initial_condition(uniform_tissue({8, 8, 8}, 0, 0, 1), {}); });
  r.check(m, "diffusion-free stable step", [](std::string& d) {
    return near(pde::stable_dt({Volume3d(Dims{4, 4, 4}, 0.0)}, 0.1, 1.0), 9.0, 1e-12, d);
  });
  r.check(m, "uniform field without reaction is stationary", [](std::string& d) {
    const auto f = pde::build_diffusion_field(uniform_tissue({6, 6, 6}, 0.7f, 0.3f, 0), {0.1, 0.3, {}}, {});
    const Volume3d c(Dims{6, 6, 6}, 0.4);
    return near((pde::step(c, f, 0.0, 0.5, 1.0).array() - 0.4).abs().maxCoeff(), 0, 1e-15, d);
  });
  r.check(m, "zero field is a fixed point", [](std::string&) {
    const auto f = pde::build_diffusion_field(uniform_tissue({6, 6, 6}, 0.7f, 0.3f, 0), {0.1, 0.3, {}}, {});
    return (pde::step(Volume3d(Dims{6, 6, 6}, 0.0), f, 0.1, 0.5, 1.0).array() == 0.0).all();
  });
  r.check(m, "negligible growth leaves the initial condition", [](std::string& d) {
    const auto t = uniform_tissue({12, 12, 12}, 1, 0, 0);
    const field::GrowthParams p{1e-12, 0.0, {0.5, 0.5, 0.5}};
    pde::SimulationConfig cfg;
    cfg.t_end = 10;
    const auto c0 = pde::seed_initial_condition(t, p);
    const auto res = pde::simulate(t, p, cfg);
    return near((res.final_state.array() - c0.array()).abs().maxCoeff(), 0, 1e-6, d);
  });
}

void dataset_checks(Runner& r, const fs::path& tmp) {
  const std::string m = "dataset";
  r.check(m, "phantom is deterministic per seed", [](std::string&) {
    return dataset::gen_phantom(small_phantom(24), 7) == dataset::gen_phantom(small_phantom(24), 7);
  });
  r.check(m, "phantom without wobble is mirror symmetric", [](std::string& d) {
    auto s = small_phantom(24);
    s.wobble = 0;
    const auto t = dataset::gen_phantom(s, 3);
    double worst = 0;
    for (int c = 0; c < 3; ++c) {
      const auto& v = t.channel(c);
      worst = std::max<double>(worst, (field::orient(v, field::AxisTransform::mirror(0)).array() - v.array())
                                          .abs().maxCoeff());
    }
    return near(worst, 0, 1e-6, d);
  });
  r.check(m, "domain corner lies outside the brain", [](std::string&) {
    const auto t = dataset::gen_phantom(small_phantom(24), 1);
    return t.wm(0, 0, 0) == 0 && t.gm(0, 0, 0) == 0 && t.csf(0, 0, 0) == 0;
  });
  r.check(m, "collapsed ranges return the lower bound", [](std::string& d) {
    field::ParamRanges pr;
    pr.rho = {0.1, 0.1 + 1e-12};
    pr.d_w = {0.2, 0.2 + 1e-12};
    const auto p = dataset::sample_params(pr, dataset::gen_phantom(small_phantom(24), 1), 5);
    return near(p.rho, 0.1, 1e-9, d) && near(p.d_w, 0.2, 1e-9, d);
  });
  r.check(m, "sampled seeds sit in white matter", [](std::string& d) {
    const auto t = dataset::gen_phantom(small_phantom(24), 2);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto sv = pde::seed_voxel(t.dims(), dataset::sample_params({}, t, s).seed);
      if (!(t.wm(sv[0], sv[1], sv[2]) > 0.5f)) {
        d = "seed " + std::to_string(s);
        return false;
      }
    }
    return true;
  });
  r.check(m, "centred tumour needs no shift and same-size resize is exact", [](std::string& d) {
    const auto t = uniform_tissue({16, 16, 16}, 1, 0, 0);
    Volume3f tumor(Dims{16, 16, 16});
    tumor(8, 8, 8) = 1.0f;
    const auto pre = dataset::preprocess(t, tumor, {16, 16, 16}, {16, 16, 16});
    return pre.provenance.shift == field::Index3{0, 0, 0} &&
           near((pre.tumor.array() - tumor.array()).abs().maxCoeff(), 0, 1e-6, d);
  });
  r.check(m, "identity augmentation", [](std::string&) {
    const dataset::Sample s{uniform_tissue({4, 4, 4}, 0.5f, 0.25f, 0.1f), ramp({4, 4, 4}), {0.1, 0.2, {0.3, 0.4, 0.5}}};
    const auto a = dataset::augment(s, field::AxisTransform::identity());
    return a.tissue == s.tissue && a.tumor == s.tumor && a.params == s.params;
  });
  r.check(m, "(2,1,1) dataset is reproducible and well formed", [&](std::string& d) {
    dataset::GenerateOptions opts;
    opts.work_dims = {20, 20, 20};
    opts.out_dims = {12, 12, 12};
    pde::SimulationConfig cfg;
    cfg.t_end = 40;
    const auto ma = dataset::generate_dataset(2, 1, 1, small_phantom(24), {}, cfg, 99, tmp / "ds_a", opts);
    dataset::generate_dataset(2, 1, 1, small_phantom(24), {}, cfg, 99, tmp / "ds_b", opts);
    if (read_tree(tmp / "ds_a") != read_tree(tmp / "ds_b")) return d = "directories differ", false;
    if (ma.n_train != 2 || ma.n_val != 1 || ma.n_test != 1 || ma.samples.size() != 4) return d = "counts", false;
    for (const auto& rec : ma.samples) {
      const float mx = dataset::load_sample(ma, rec).target.array().maxCoeff();
      if (!(mx > 0 && mx <= 1)) return d = rec.id + " max " + num(mx), false;
    }
    return true;
  });
}

void nn_checks(Runner& r) {
  const std::string m = "nn";
  r.check(m, "softmax of zeros is uniform", [](std::string& d) {
    const auto s = nn::softmax(TensorD(Shape{3}, 0.0), 0);
    return near((s.value() - 1.0 / 3).abs().maxCoeff(), 0, 1e-15, d);
  });
  r.check(m, "matmul shape algebra", [](std::string&) {
    return nn::matmul(TensorD(Shape{2, 3}, 1.0), TensorD(Shape{3, 4}, 1.0)).shape() == Shape{2, 4};
  });
  r.check(m, "relu derivative", [](std::string&) {
    auto x = TensorD::from({2}, {-1.0, 2.0});
    x.set_requires_grad(true);
    nn::Tape<double> tape;
    {
      nn::TapeScope<double> scope(tape);
      tape.backward(nn::sum(nn::relu(x)));
    }
    return x.grad()[0] == 0.0 && x.grad()[1] == 1.0;
  });
  r.check(m, "unit 1x1x1 kernel copies the input", [](std::string&) {
    Rng rng(1);
    const auto x = rand_t({1, 1, 3, 4, 5}, rng);
    const auto y = nn::conv3d<double>(x, TensorD(Shape{1, 1, 1, 1, 1}, 1.0), nullptr, 1, 0);
    return (y.value() == x.value()).all();
  });
  r.check(m, "nearest upsampling replicates blocks", [](std::string&) {
    auto x = TensorD::from({1, 1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    const auto y = nn::upsample_nearest2x(x);
    if (y.shape() != Shape{1, 1, 4, 4, 4}) return false;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          if (y.data()[(a * 4 + b) * 4 + c] != x.data()[((a / 2) * 2 + b / 2) * 2 + c / 2]) return false;
    return (nn::upsample_nearest2x(TensorD(Shape{1, 2, 3, 3, 3}, 0.5)).value() == 0.5).all();
  });
  r.check(m, "batch norm standardizes each channel", [](std::string& d) {
    TensorD x(Shape{4, 1, 1, 1, 2});
    const double v[8] = {3, 7, 3, 7, 3, 7, 3, 7};  // mean 5, variance 4
    std::copy(v, v + 8, x.data());
    nn::BatchNormState<double> st(1);
    const auto y = nn::batch_norm(x, TensorD(Shape{1}, 1.0), TensorD(Shape{1}, 0.0), st, true);
    const double var = y.value().square().mean();
    return near(y.value().mean(), 0, 1e-12, d) && near(var, 4.0 / (4.0 + 1e-5), 1e-12, d);
  });
  r.check(m, "layer norm of a single element", [](std::string&) {
    const auto y = nn::layer_norm(TensorD(Shape{1, 1}, 3.0), TensorD(Shape{1}, 1.0), TensorD(Shape{1}, 0.0));
    return y.value()[0] == 0.0;
  });
  r.check(m, "attention over one token returns its value projection", [](std::string& d) {
    Rng rng(4);
    nn::MultiHeadAttention<double> att(4, 2, nn::InitKind::torch_default, rng);
    const auto x = rand_t({1, 1, 4}, rng);
    const auto v = nn::slice(att.qkv.forward(x), 2, 8, 4);
    return near((att.forward(x).value() - att.proj.forward(v).value()).abs().maxCoeff(), 0, 1e-12, d);
  });
  r.check(m, "identical tokens give identical rows", [](std::string&) {
    Rng rng(5);
    nn::MultiHeadAttention<double> att(4, 2, nn::InitKind::torch_default, rng);
    const auto t = rand_t({1, 1, 4}, rng);
    const auto y = att.forward(nn::concat(std::vector<nn::Tensor<double>>{t, t}, 1));
    return (nn::slice(y, 1, 0, 1).value() == nn::slice(y, 1, 1, 1).value()).all();
  });
  r.check(m, "mse of exact and constant-offset predictions", [](std::string& d) {
    Rng rng(6);
    const auto t = rand_t({2, 3}, rng);
    return nn::mse_loss(t, t).value()[0] == 0.0 &&
           near(nn::mse_loss(nn::add_scalar(t, 0.1), t).value()[0], 0.01, 1e-12, d);
  });
  r.check(m, "gradient of a sum of squares", [](std::string&) {
    auto x = TensorD::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    nn::Tape<double> tape;
    {
      nn::TapeScope<double> scope(tape);
      tape.backward(nn::sum(nn::mul(x, x)));
    }
    return x.grad()[0] == 2.0 && x.grad()[1] == 4.0;
  });
  r.check(m, "detached branch receives no gradient", [](std::string&) {
    auto x = TensorD::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    nn::Tape<double> tape;
    {
      nn::TapeScope<double> scope(tape);
      tape.backward(nn::sum(nn::mul(nn::detach(x), nn::detach(x))));
    }
    return !x.has_grad() || (x.grad().array() == 0.0).all();
  });
  r.check(m, "initialization is seeded and biases start at zero", [](std::string&) {
    Rng a(8), b(8);
    nn::Linear<double> la(5, 3, nn::InitKind::kaiming_normal, a), lb(5, 3, nn::InitKind::kaiming_normal, b);
    return (la.weight.value() == lb.weight.value()).all() && (la.bias.value() == 0.0).all();
  });
}

models::ModelConfig tiny_ts() {
  models::ModelConfig c;
  c.arch = models::Arch::tumorsurrogate;
  c.ts.input = 8;
  c.ts.channels = {2, 3};
  c.ts.param_channels = 2;
  c.ts.head_channels = 2;
  return c;
}

void models_checks(Runner& r, const fs::path& tmp) {
  const std::string m = "models";
  Rng rng(11);
  const auto x32 = rand_t<float>({1, 3, 32, 32, 32}, rng, 0, 1);
  const auto th1 = rand_t<float>({1, 5}, rng, 0, 1);
  r.check(m, "TS desk output shape and range", [&](std::string&) {
    auto net = models::build_model<float>(models::preset_model(models::Arch::tumorsurrogate, models::Preset::desk), 1);
    const auto y = net->forward(x32, th1);
    return y.shape() == Shape{1, 1, 32, 32, 32} && y.value().minCoeff() >= 0 && y.value().maxCoeff() <= 1;
  });
  r.check(m, "UNet desk main and auxiliary shapes", [&](std::string&) {
    auto net = models::build_model<float>(models::preset_model(models::Arch::unet_reg, models::Preset::desk), 1);
    const auto o = net->forward_all(x32, th1);
    return o.main.shape() == Shape{1, 1, 32, 32, 32} && o.aux.size() == 2 && o.aux[0].shape() == Shape{1, 1, 16, 16, 16} &&
           o.aux[1].shape() == Shape{1, 1, 8, 8, 8};
  });
  r.check(m, "deep supervision weights sum to one; off means one loss term", [&](std::string& d) {
    auto c = models::preset_model(models::Arch::unet_reg, models::Preset::desk);
    double s = 0;
    for (double w : c.unet.ds_weights) s += w;
    c.unet.deep_supervision = false;
    auto net = models::build_model<float>(c, 1);
    return near(s, 1, 1e-12, d) && net->forward_all(x32, th1).aux.empty();
  });
  r.check(m, "ViT output matches the input grid", [&](std::string&) {
    auto net = models::build_model<float>(models::preset_model(models::Arch::vit3d, models::Preset::desk), 1);
    return net->forward(x32, th1).shape() == Shape{1, 1, 32, 32, 32};
  });
  r.check(m, "identical batch members give identical outputs", [&](std::string&) {
    auto net = models::build_model<float>(tiny_ts(), 2);
    Rng g(3);
    const auto x = rand_t<float>({1, 3, 8, 8, 8}, g, 0, 1);
    const auto t = rand_t<float>({1, 5}, g, 0, 1);
    net->train();
    net->forward(nn::concat(std::vector<nn::Tensor<float>>{x, x}, 0), nn::concat(std::vector<nn::Tensor<float>>{t, t}, 0));
    net->eval();
    const auto y = net->forward(nn::concat(std::vector<nn::Tensor<float>>{x, x}, 0), nn::concat(std::vector<nn::Tensor<float>>{t, t}, 0));
    return (nn::slice(y, 0, 0, 1).value() == nn::slice(y, 0, 1, 1).value()).all();
  });
  r.check(m, "training log rows and seeded repeatability", [&](std::string& d) {
    models::MemorySplit split;
    Rng g(4);
    for (int i = 0; i < 4; ++i) {
      models::MemorySample s;
      s.id = "m" + std::to_string(i);
      s.n = 8;
      for (int k = 0; k < 3 * 512; ++k) s.tissue.push_back(static_cast<float>(uniform01(g) / 3));
      for (int k = 0; k < 512; ++k) s.target.push_back(static_cast<float>(uniform01(g)));
      for (double& v : s.theta) v = uniform01(g);
      split.samples.push_back(std::move(s));
    }
    models::TrainConfig cfg = models::preset_training(models::Arch::tumorsurrogate, models::Preset::desk);
    cfg.model = tiny_ts();
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.seed = 5;
    const auto a = models::train(cfg, split, {}, tmp / "train_a");
    const auto b = models::train(cfg, split, {}, tmp / "train_b");
    std::ifstream f(tmp / "train_a" / "train_log.csv");
    std::string line;
    int rows = -1;
    while (std::getline(f, line)) ++rows;
    if (rows != 3) return d = std::to_string(rows) + " rows", false;
    return a.log.back().train_mse == b.log.back().train_mse;
  });
}

void eval_checks(Runner& r, const fs::path& tmp) {
  const std::string m = "eval";
  const auto t = ramp({10, 10, 10});
  r.check(m, "exact prediction has zero error", [&](std::string&) { return eval::mse(t, t) == 0 && eval::mae(t, t) == 0; });
  r.check(m, "constant residual", [&](std::string& d) {
    Volume3f p = t;
    p.array() += 0.1f;
    return near(eval::mse(p, t), 0.01, 1e-7, d) && near(eval::mae(p, t), 0.1, 1e-7, d);
  });
  r.check(m, "SSIM of identical volumes", [&](std::string& d) { return near(eval::ssim3d(t, t), 1, 1e-12, d); });
  r.check(m, "SSIM of an inverted binary volume stays in range", [&](std::string& d) {
    Volume3f b = t, inv = t;
    b.array() = (t.array() > 0.5f).cast<float>();
    inv.array() = 1.0f - b.array();
    const double s = eval::ssim3d(inv, b);
    d = num(s);
    return s < 1 && s >= -1;
  });
  r.check(m, "dice of identical and disjoint masks", [](std::string&) {
    Volume3f a(Dims{4, 4, 4}), b(Dims{4, 4, 4});
    a(0, 0, 0) = 1;
    b(3, 3, 3) = 1;
    return eval::dice(a, a, 0.5) == 1.0 && eval::dice(a, b, 0.5) == 0.0;
  });
  r.check(m, "dice curve of a perfect prediction", [&](std::string&) {
    const auto th = eval::default_thresholds();
    for (const auto& v : eval::dice_curve(t, t, th))
      if (v && *v != 1.0) return false;
    return true;
  });
  r.check(m, "solver output against itself", [](std::string&) {
    const auto tis = dataset::gen_phantom(small_phantom(24), 3);
    const auto p = dataset::sample_params({}, tis, 3);
    pde::SimulationConfig cfg;
    cfg.t_end = 30;
    const auto a = pde::simulate(tis, p, cfg).final_state.cast<float>();
    const auto b = pde::simulate(tis, p, cfg).final_state.cast<float>();
    const auto th = eval::default_thresholds();
    for (const auto& v : eval::dice_curve(a, b, th))
      if (v && *v != 1.0) return false;
    return true;
  });
  r.check(m, "solver evaluated on its own targets", [&](std::string& d) {
    const auto man = dataset::load_manifest(tmp / "ds_a");
    eval::EvalOptions opts;
    opts.split = dataset::Split::train;
    const auto rep = eval::evaluate(eval::Predictor::solver(), man, opts);
    if (rep.size() != man.split(dataset::Split::train).size()) return d = "row count", false;
    for (const auto& a : rep.dice)
      if (a.n > 0 && a.mean != 1.0) return d = "dice", false;
    return rep.mse.mean == 0 && rep.mae.mean == 0 && rep.ssim.mean == 1;
  });
  r.check(m, "a single sample reports zero stderr with a flag", [](std::string&) {
    const std::vector<double> one{0.3};
    const auto a = eval::aggregate(one);
    return a.stderr_ == 0 && a.degenerate && a.n == 1;
  });
}

void calibrate_checks(Runner& r) {
  const std::string m = "calibrate";
  auto cfg = tiny_ts();
  cfg.ts.batch_norm = false;
  auto net = models::build_model<float>(cfg, 6);
  calibrate::CalibrationProblem p;
  p.tissue = uniform_tissue({8, 8, 8}, 0.6f, 0.3f, 0.05f);
  p.observation = ramp({8, 8, 8});
  p.settings.starts = 2;
  p.settings.iterations = 0;
  r.check(m, "zero iterations return the initialization", [&](std::string&) {
    const auto res = calibrate::calibrate_gradient(*net, p, 1);
    const auto& s = res.starts[0];
    return s.theta_best == s.theta_init && s.best_loss == calibrate::problem_loss(*net, p, {s.theta_init})[0];
  });
  r.check(m, "random search with budget one", [&](std::string&) {
    const auto res = calibrate::random_search_baseline(*net, p, 1, 2);
    return res.forward_passes == 1 && res.theta_norm == res.starts[0].theta_init;
  });
  r.check(m, "random search best is monotone in the budget", [&](std::string&) {
    double prev = std::numeric_limits<double>::infinity();
    for (int b : {1, 4, 16}) {
      const double l = calibrate::random_search_baseline(*net, p, b, 2).best_loss;
      if (l > prev) return false;
      prev = l;
    }
    return true;
  });
}

void cli_checks(Runner& r, const fs::path& tmp) {
  const std::string m = "cli";
  r.check(m, "simulate twice gives identical volumes", [&](std::string& d) {
    {
      std::ofstream f(tmp / "sim.json");
      f << R"({"phantom": {"dims": [24, 24, 24]}, "simulation": {"t_end": 20}})";
    }
    std::ostringstream o, e;
    for (const char* dir : {"sim_a", "sim_b"}) {
      const int code = run({"simulate", "--config", (tmp / "sim.json").string(), "--seed", "3", "--threads", "1",
                            "--out", (tmp / dir).string()},
                           o, e);
      if (code != 0) return d = e.str(), false;
    }
    return read_tree(tmp / "sim_a") == read_tree(tmp / "sim_b");
  });
  r.check(m, "eval of the solver on its own targets", [&](std::string& d) {
    {
      std::ofstream f(tmp / "eval.json");
      f << R"({"predictor": "solver", "split": "test", "data": ")" << (tmp / "ds_a").string() << "\"}";
    }
    std::ostringstream o, e;
    if (run({"eval", "--config", (tmp / "eval.json").string(), "--out", (tmp / "eval").string()}, o, e) != 0) {
      return d = e.str(), false;
    }
    std::ifstream f(tmp / "eval" / "summary.csv");
    std::string header, mse_row, mae_row, ssim_row;
    std::getline(f, header);
    std::getline(f, mse_row);
    std::getline(f, mae_row);
    std::getline(f, ssim_row);
    return mse_row.rfind("mse,0,", 0) == 0 && ssim_row.rfind("ssim,1,", 0) == 0;
  });
  r.check(m, "unknown config keys are config errors", [&](std::string&) {
    {
      std::ofstream f(tmp / "bad.json");
      f << R"({"phantom": {"dims": [8, 8, 8]}, "bogus": 1})";
    }
    std::ostringstream o, e;
    return run({"phantom", "--config", (tmp / "bad.json").string(), "--out", (tmp / "bad").string()}, o, e) ==
           exit_config;
  });
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  const auto tmp = fs::temp_directory_path() / ("tumornet_selftest_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  Runner r;
  field_checks(r, tmp);
  pde_checks(r);
  dataset_checks(r, tmp);
  nn_checks(r);
  models_checks(r, tmp);
  eval_checks(r, tmp);
  calibrate_checks(r);
  cli_checks(r, tmp);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  return r.out;
}

}  // namespace tumornet::cli
