#include "tumornet/models/config.hpp"

#include "tumornet/core/json.hpp"

namespace tumornet::models {

namespace {

void need(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::config, what);
}

}  // namespace

std::string to_string(Arch a) {
  switch (a) {
    case Arch::tumorsurrogate:
      return "tumorsurrogate";
    case Arch::unet_reg:
      return "unet_reg";
    case Arch::vit3d:
      return "vit3d";
  }
  return "tumorsurrogate";
}

Arch arch_from_string(const std::string& s) {
  if (s == "tumorsurrogate" || s == "ts") return Arch::tumorsurrogate;
  if (s == "unet_reg" || s == "unet") return Arch::unet_reg;
  if (s == "vit3d" || s == "vit") return Arch::vit3d;
  throw Error(ErrorCode::config, "unknown architecture '" + s + "' (tumorsurrogate, unet_reg, vit3d)");
}

std::string to_string(Preset p) {
  return p == Preset::desk ? "desk" : "paper";
}

Preset preset_from_string(const std::string& s) {
  if (s == "desk") return Preset::desk;
  if (s == "paper") return Preset::paper;
  throw Error(ErrorCode::config, "unknown preset '" + s + "' (desk, paper)");
}

void TSConfig::validate() const {
  need(!channels.empty(), "tumorsurrogate: channels must not be empty");
  for (int c : channels) need(c > 0, "tumorsurrogate: channel counts must be positive");
  const int f = 1 << channels.size();
  need(input >= f && input % f == 0,
       "tumorsurrogate: input " + std::to_string(input) + " not divisible by 2^" + std::to_string(channels.size()));
  need(blocks_per_level >= 1 && param_channels >= 1 && head_channels >= 1, "tumorsurrogate: block/channel counts must be >= 1");
}

void UNetRegConfig::validate() const {
  need(levels >= 1 && base_channels >= 1 && max_channels >= base_channels && param_channels >= 1,
       "unet_reg: invalid level/channel settings");
  const int f = 1 << levels;
  need(input >= f && input % f == 0,
       "unet_reg: input " + std::to_string(input) + " not divisible by 2^" + std::to_string(levels));
  if (deep_supervision) {
    need(!ds_weights.empty() && static_cast<int>(ds_weights.size()) <= levels,
         "unet_reg: need 1..levels deep-supervision weights");
    double s = 0;
    for (double w : ds_weights) {
      need(w >= 0, "unet_reg: deep-supervision weights must be >= 0");
      s += w;
    }
    need(std::abs(s - 1.0) < 1e-9, "unet_reg: deep-supervision weights must sum to 1");
  }
}

void ViTConfig::validate() const {
  need(patch >= 1 && input % patch == 0,
       "vit3d: input " + std::to_string(input) + " not divisible by patch " + std::to_string(patch));
  need(dim >= 1 && heads >= 1 && dim % heads == 0,
       "vit3d: embedding dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  need(depth >= 1 && mlp_ratio > 0, "vit3d: depth and mlp_ratio must be positive");
}

int ModelConfig::input() const {
  switch (arch) {
    case Arch::tumorsurrogate:
      return ts.input;
    case Arch::unet_reg:
      return unet.input;
    case Arch::vit3d:
      return vit.input;
  }
  return 0;
}

void ModelConfig::validate() const {
  switch (arch) {
    case Arch::tumorsurrogate:
      ts.validate();
      return;
    case Arch::unet_reg:
      unet.validate();
      return;
    case Arch::vit3d:
      vit.validate();
      return;
  }
}

ModelConfig preset_model(Arch arch, Preset p) {
  ModelConfig c;
  c.arch = arch;
  const bool paper = p == Preset::paper;
  c.ts.input = c.unet.input = c.vit.input = paper ? 64 : 32;
  c.ts.channels = paper ? std::vector<int>{32, 64, 128} : std::vector<int>{16, 32, 64};
  c.ts.head_channels = paper ? 16 : 8;
  c.unet.base_channels = paper ? 32 : 16;
  c.unet.levels = paper ? 4 : 3;
  c.unet.max_channels = 320;
  if (paper) {
    c.vit.patch = 16;
    c.vit.dim = 384;
    c.vit.depth = 12;
    c.vit.heads = 6;
    c.vit.mlp_ratio = 4.0;
  }
  return c;
}

ModelConfig ts_baseline(Preset p) {
  ModelConfig c = preset_model(Arch::tumorsurrogate, p);
  c.ts.batch_norm = false;
  c.ts.init = nn::InitKind::torch_default;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json body;
  switch (c.arch) {
    case Arch::tumorsurrogate:
      body = {{"input", c.ts.input},
              {"channels", c.ts.channels},
              {"blocks_per_level", c.ts.blocks_per_level},
              {"batch_norm", c.ts.batch_norm},
              {"init", nn::to_string(c.ts.init)},
              {"param_channels", c.ts.param_channels},
              {"head_channels", c.ts.head_channels}};
      break;
    case Arch::unet_reg:
      body = {{"input", c.unet.input},
              {"levels", c.unet.levels},
              {"base_channels", c.unet.base_channels},
              {"max_channels", c.unet.max_channels},
              {"batch_norm", c.unet.batch_norm},
              {"deep_supervision", c.unet.deep_supervision},
              {"ds_weights", c.unet.ds_weights},
              {"init", nn::to_string(c.unet.init)},
              {"param_channels", c.unet.param_channels}};
      break;
    case Arch::vit3d:
      body = {{"input", c.vit.input}, {"patch", c.vit.patch},         {"dim", c.vit.dim},
              {"depth", c.vit.depth}, {"heads", c.vit.heads},         {"mlp_ratio", c.vit.mlp_ratio},
              {"init", nn::to_string(c.vit.init)}};
      break;
  }
  j = nlohmann::json{{"arch", to_string(c.arch)}, {"config", body}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  reject_unknown(j, {"arch", "preset", "config"}, "model");
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  if (j.contains("preset")) c = preset_model(c.arch, preset_from_string(j.at("preset").get<std::string>()));
  if (!j.contains("config")) {
    c.validate();
    return;
  }
  const auto& b = j.at("config");
  auto init = [&](nn::InitKind& k) {
    if (b.contains("init")) k = nn::init_kind_from_string(b.at("init").get<std::string>());
  };
  switch (c.arch) {
    case Arch::tumorsurrogate:
      reject_unknown(b, {"input", "channels", "blocks_per_level", "batch_norm", "init", "param_channels", "head_channels"},
                     "model.config");
      read_optional(b, "input", c.ts.input, "model.config");
      read_optional(b, "channels", c.ts.channels, "model.config");
      read_optional(b, "blocks_per_level", c.ts.blocks_per_level, "model.config");
      read_optional(b, "batch_norm", c.ts.batch_norm, "model.config");
      init(c.ts.init);
      read_optional(b, "param_channels", c.ts.param_channels, "model.config");
      read_optional(b, "head_channels", c.ts.head_channels, "model.config");
      break;
    case Arch::unet_reg:
      reject_unknown(b, {"input", "levels", "base_channels", "max_channels", "batch_norm", "deep_supervision", "ds_weights",
                         "init", "param_channels"},
                     "model.config");
      read_optional(b, "input", c.unet.input, "model.config");
      read_optional(b, "levels", c.unet.levels, "model.config");
      read_optional(b, "base_channels", c.unet.base_channels, "model.config");
      read_optional(b, "max_channels", c.unet.max_channels, "model.config");
      read_optional(b, "batch_norm", c.unet.batch_norm, "model.config");
      read_optional(b, "deep_supervision", c.unet.deep_supervision, "model.config");
      read_optional(b, "ds_weights", c.unet.ds_weights, "model.config");
      init(c.unet.init);
      read_optional(b, "param_channels", c.unet.param_channels, "model.config");
      break;
    case Arch::vit3d:
      reject_unknown(b, {"input", "patch", "dim", "depth", "heads", "mlp_ratio", "init"}, "model.config");
      read_optional(b, "input", c.vit.input, "model.config");
      read_optional(b, "patch", c.vit.patch, "model.config");
      read_optional(b, "dim", c.vit.dim, "model.config");
      read_optional(b, "depth", c.vit.depth, "model.config");
      read_optional(b, "heads", c.vit.heads, "model.config");
      read_optional(b, "mlp_ratio", c.vit.mlp_ratio, "model.config");
      init(c.vit.init);
      break;
  }
  c.validate();
}

}  // namespace tumornet::models
