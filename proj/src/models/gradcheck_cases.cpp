#include "tumornet/models/gradcheck_cases.hpp"

#include <algorithm>

#include "tumornet/models/model.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::models {

using nn::GradcheckCase;
using nn::GradcheckOptions;
using nn::TensorD;

namespace {

std::uint64_t name_seed(const GradcheckOptions& opts, const std::string& name) {
  return derive_seed(opts.seed, std::hash<std::string>{}(name));
}

// Stacked ReLUs put kinks closer together than the default step; central
// differences straddling one are meaningless.
GradcheckOptions fine_step(GradcheckOptions opts) {
  opts.h = std::min(opts.h, 1e-6);
  return opts;
}

// Loss over the main head and every auxiliary head.
TensorD output_loss(const ModelOutput<double>& out) {
  auto loss = nn::weighted_sum(out.main, 11);
  for (std::size_t i = 0; i < out.aux.size(); ++i) loss = nn::add(loss, nn::weighted_sum(out.aux[i], 12 + i));
  return loss;
}

GradcheckCase model_case(std::string name, ModelConfig cfg, int batch, bool eval_mode = false) {
  return {name, [=](const GradcheckOptions& opts) {
            Rng rng(name_seed(opts, name));
            auto m = build_model<double>(cfg, rng());
            const int n = cfg.input();
            auto tissue = nn::random_tensor({batch, kTissueChannels, n, n, n}, rng, 0.0, 1.0);
            auto theta = nn::random_tensor({batch, kParamCount}, rng, 0.05, 0.95);
            m->train(true);
            if (eval_mode) {
              m->forward(tissue, theta);
              m->eval();
            }
            std::vector<TensorD> inputs{tissue, theta};
            for (auto& [k, p] : m->parameters()) inputs.push_back(p);
            return nn::gradcheck([&] { return output_loss(m->forward_all(tissue, theta)); }, inputs, fine_step(opts));
          }};
}

ModelConfig tiny_ts(bool bn) {
  ModelConfig c;
  c.arch = Arch::tumorsurrogate;
  c.ts.input = 8;
  c.ts.channels = {2, 3};
  c.ts.batch_norm = bn;
  c.ts.init = bn ? nn::InitKind::kaiming_normal : nn::InitKind::torch_default;
  c.ts.param_channels = 2;
  c.ts.head_channels = 2;
  return c;
}

ModelConfig tiny_unet(bool deep_supervision) {
  ModelConfig c;
  c.arch = Arch::unet_reg;
  c.unet.input = 8;
  c.unet.levels = 2;
  c.unet.base_channels = 2;
  c.unet.max_channels = 3;
  c.unet.param_channels = 2;
  c.unet.deep_supervision = deep_supervision;
  c.unet.ds_weights = {2.0 / 3, 1.0 / 3};
  return c;
}

ModelConfig tiny_vit() {
  ModelConfig c;
  c.arch = Arch::vit3d;
  c.vit.input = 8;
  c.vit.patch = 4;
  c.vit.dim = 8;
  c.vit.depth = 2;
  c.vit.heads = 2;
  c.vit.mlp_ratio = 2.0;
  c.vit.init = nn::InitKind::kaiming_normal;  // larger weights than normal_002 give better-conditioned checks
  return c;
}

}  // namespace

std::vector<GradcheckCase> architecture_gradcheck_cases() {
  std::vector<GradcheckCase> c;
  c.push_back({"ConvBlock_bn", [](const GradcheckOptions& opts) {
                 Rng rng(name_seed(opts, "ConvBlock_bn"));
                 ConvBlock<double> b(2, 3, 1, true, nn::InitKind::kaiming_normal, rng);
                 auto x = nn::random_tensor({2, 2, 4, 4, 4}, rng);
                 std::vector<TensorD> inputs{x};
                 for (auto& [k, p] : b.parameters()) inputs.push_back(p);
                 return nn::gradcheck([&] { return nn::weighted_sum(b.forward(x), 11); }, inputs, fine_step(opts));
               }});
  c.push_back({"ConvBlock_stride2_plain", [](const GradcheckOptions& opts) {
                 Rng rng(name_seed(opts, "ConvBlock_stride2_plain"));
                 ConvBlock<double> b(2, 2, 2, false, nn::InitKind::torch_default, rng);
                 auto x = nn::random_tensor({1, 2, 4, 4, 4}, rng);
                 std::vector<TensorD> inputs{x};
                 for (auto& [k, p] : b.parameters()) inputs.push_back(p);
                 return nn::gradcheck([&] { return nn::weighted_sum(b.forward(x), 11); }, inputs, fine_step(opts));
               }});
  c.push_back(model_case("TumorSurrogate_bn", tiny_ts(true), 2));
  c.push_back(model_case("TumorSurrogate_bn_eval", tiny_ts(true), 2, true));
  c.push_back(model_case("TumorSurrogate_baseline", tiny_ts(false), 1));
  c.push_back(model_case("UNetReg_deep_supervision", tiny_unet(true), 2));
  c.push_back(model_case("UNetReg_single_head", tiny_unet(false), 2));
  c.push_back(model_case("ViT3d", tiny_vit(), 2));
  c.push_back({"ViT3d_patchify_unpatchify", [](const GradcheckOptions& opts) {
                 Rng rng(name_seed(opts, "ViT3d_patchify_unpatchify"));
                 ViT3d<double> m(tiny_vit(), 1);
                 auto x = nn::random_tensor({2, 1, 8, 8, 8}, rng);
                 // One-channel volume through patchify (channel count enters only the row width).
                 auto f = [&] {
                   auto p = m.patchify(nn::concat<double>({x, x, x}, 1));
                   return nn::weighted_sum(m.unpatchify(nn::slice(p, 2, 0, 64)), 11);
                 };
                 return nn::gradcheck(f, {x}, opts);
               }});
  return c;
}

std::vector<GradcheckCase> all_gradcheck_cases() {
  auto c = nn::primitive_gradcheck_cases();
  for (auto& a : architecture_gradcheck_cases()) c.push_back(std::move(a));
  return c;
}

}  // namespace tumornet::models
