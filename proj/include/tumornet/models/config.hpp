#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/nn/layers.hpp"

namespace tumornet::models {

enum class Arch { tumorsurrogate, unet_reg, vit3d };
enum class Preset { desk, paper };

std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);
std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);

inline constexpr int kParamCount = 5;
inline constexpr int kTissueChannels = 3;

struct TSConfig {
  int input = 32;                      // cubic input side
  std::vector<int> channels{16, 32, 64};  // one stride-2 level per entry
  int blocks_per_level = 1;
  bool batch_norm = true;
  nn::InitKind init = nn::InitKind::kaiming_normal;
  int param_channels = 8;
  int head_channels = 8;  // width of the last full-resolution conv

  void validate() const;
};

struct UNetRegConfig {
  int input = 32;
  int levels = 3;
  int base_channels = 16;
  int max_channels = 256;
  bool batch_norm = true;
  bool deep_supervision = true;
  std::vector<double> ds_weights{4.0 / 7, 2.0 / 7, 1.0 / 7};  // finest first
  nn::InitKind init = nn::InitKind::kaiming_normal;
  int param_channels = 8;

  void validate() const;
};

struct ViTConfig {
  int input = 32;
  int patch = 8;
  int dim = 128;
  int depth = 4;
  int heads = 4;
  double mlp_ratio = 4.0;
  nn::InitKind init = nn::InitKind::normal_002;

  int grid() const { return input / patch; }
  int spatial_tokens() const { return grid() * grid() * grid(); }
  void validate() const;
};

struct ModelConfig {
  Arch arch = Arch::tumorsurrogate;
  TSConfig ts;
  UNetRegConfig unet;
  ViTConfig vit;

  int input() const;
  void validate() const;
};

// TS optimized (batch norm, Kaiming) at desk or paper scale.
ModelConfig preset_model(Arch arch, Preset p);
// TS baseline: no batch norm, default uniform init; trained with masked_mse.
ModelConfig ts_baseline(Preset p);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace tumornet::models
