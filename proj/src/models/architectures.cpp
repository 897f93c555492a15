#include <algorithm>

#include "tumornet/models/model.hpp"

namespace tumornet::models {

using nn::Shape;
using nn::Tensor;

template <typename T>
ModelOutput<T> ConditionedModel<T>::forward_all(const Tensor<T>& tissue, const Tensor<T>& theta) {
  const int n = input();
  if (tissue.rank() != 5 || tissue.dim(1) != kTissueChannels || tissue.dim(2) != n || tissue.dim(3) != n ||
      tissue.dim(4) != n) {
    throw Error(ErrorCode::shape_mismatch, "model expects tissue (B, 3, " + std::to_string(n) + ", " +
                                               std::to_string(n) + ", " + std::to_string(n) + "), got " +
                                               nn::shape_string(tissue.shape()));
  }
  if (theta.rank() != 2 || theta.dim(0) != tissue.dim(0) || theta.dim(1) != kParamCount) {
    throw Error(ErrorCode::shape_mismatch, "model expects theta (" + std::to_string(tissue.dim(0)) + ", 5), got " +
                                               nn::shape_string(theta.shape()));
  }
  const T tol = T(1e-6);
  if (!(theta.value().minCoeff() >= -tol && theta.value().maxCoeff() <= T(1) + tol)) {
    throw Error(ErrorCode::invalid_argument, "theta_norm must lie in [0,1]^5");
  }
  return run(tissue, theta);
}

template <typename T>
ConvBlock<T>::ConvBlock(int cin, int cout, int stride, bool batch_norm, nn::InitKind init, Rng& rng)
    : conv_(cin, cout, 3, stride, 1, init, rng, !batch_norm) {
  this->add_child("conv", &conv_);
  if (batch_norm) {
    bn_ = std::make_unique<nn::BatchNorm<T>>(cout);
    this->add_child("bn", bn_.get());
  }
}

template <typename T>
Tensor<T> ConvBlock<T>::forward(const Tensor<T>& x) {
  auto h = conv_.forward(x);
  if (bn_) h = bn_->forward(h);
  return nn::relu(h);
}

template <typename T>
TumorSurrogate<T>::TumorSurrogate(const ModelConfig& cfg, std::uint64_t seed) : ConditionedModel<T>(cfg) {
  cfg.ts.validate();
  const auto& c = cfg.ts;
  Rng rng(seed);
  const int L = static_cast<int>(c.channels.size());
  stem_ = std::make_unique<ConvBlock<T>>(kTissueChannels, c.channels[0], 1, c.batch_norm, c.init, rng);
  this->add_child("stem", stem_.get());
  for (int i = 0; i < L; ++i) {
    const int cin = i == 0 ? c.channels[0] : c.channels[i - 1];
    encoder_.push_back(std::make_unique<nn::ResBlock<T>>(cin, c.channels[i], 2, c.batch_norm, c.init, rng));
    for (int b = 1; b < c.blocks_per_level; ++b) {
      encoder_.push_back(std::make_unique<nn::ResBlock<T>>(c.channels[i], c.channels[i], 1, c.batch_norm, c.init, rng));
    }
  }
  for (std::size_t i = 0; i < encoder_.size(); ++i) this->add_child("enc" + std::to_string(i), encoder_[i].get());
  const int grid = c.input >> L;
  param_ = std::make_unique<nn::ParamProjection<T>>(kParamCount, c.param_channels, grid, c.init, rng);
  this->add_child("param", param_.get());
  bottleneck_ = std::make_unique<nn::ResBlock<T>>(c.channels[L - 1] + c.param_channels, c.channels[L - 1], 1,
                                                  c.batch_norm, c.init, rng);
  this->add_child("bottleneck", bottleneck_.get());
  for (int i = L - 1; i >= 0; --i) {
    const int cout = i > 0 ? c.channels[i - 1] : c.head_channels;
    up_.push_back(std::make_unique<ConvBlock<T>>(c.channels[i], cout, 1, c.batch_norm, c.init, rng));
    this->add_child("up" + std::to_string(i), up_.back().get());
    if (i > 0) {
      decoder_.push_back(std::make_unique<nn::ResBlock<T>>(cout, cout, 1, c.batch_norm, c.init, rng));
      this->add_child("dec" + std::to_string(i), decoder_.back().get());
    }
  }
  head_ = std::make_unique<nn::Conv3d<T>>(c.head_channels, 1, 1, 1, 0, c.init, rng);
  this->add_child("head", head_.get());
}

template <typename T>
ModelOutput<T> TumorSurrogate<T>::run(const Tensor<T>& tissue, const Tensor<T>& theta) {
  auto x = stem_->forward(tissue);
  for (auto& e : encoder_) x = e->forward(x);
  x = bottleneck_->forward(nn::concat<T>({x, param_->forward(theta)}, 1));
  for (std::size_t j = 0; j < up_.size(); ++j) {
    x = up_[j]->forward(nn::upsample_nearest2x(x));
    if (j < decoder_.size()) x = decoder_[j]->forward(x);
  }
  return {nn::sigmoid(head_->forward(x)), {}};
}

template <typename T>
UNetReg<T>::UNetReg(const ModelConfig& cfg, std::uint64_t seed) : ConditionedModel<T>(cfg) {
  cfg.unet.validate();
  const auto& c = cfg.unet;
  Rng rng(seed);
  for (int l = 0; l <= c.levels; ++l) widths_.push_back(std::min(c.base_channels << l, c.max_channels));
  for (int l = 0; l <= c.levels; ++l) {
    const int cin = l == 0 ? kTissueChannels : widths_[l - 1];
    enc_a_.push_back(std::make_unique<ConvBlock<T>>(cin, widths_[l], l == 0 ? 1 : 2, c.batch_norm, c.init, rng));
    enc_b_.push_back(std::make_unique<ConvBlock<T>>(widths_[l], widths_[l], 1, c.batch_norm, c.init, rng));
    this->add_child("enc" + std::to_string(l) + "a", enc_a_.back().get());
    this->add_child("enc" + std::to_string(l) + "b", enc_b_.back().get());
  }
  param_ = std::make_unique<nn::ParamProjection<T>>(kParamCount, c.param_channels, c.input >> c.levels, c.init, rng);
  this->add_child("param", param_.get());
  bottleneck_ = std::make_unique<ConvBlock<T>>(widths_[c.levels] + c.param_channels, widths_[c.levels], 1, c.batch_norm,
                                               c.init, rng);
  this->add_child("bottleneck", bottleneck_.get());
  for (int l = c.levels - 1; l >= 0; --l) {
    up_.push_back(std::make_unique<ConvBlock<T>>(widths_[l + 1], widths_[l], 1, c.batch_norm, c.init, rng));
    dec_a_.push_back(std::make_unique<ConvBlock<T>>(2 * widths_[l], widths_[l], 1, c.batch_norm, c.init, rng));
    dec_b_.push_back(std::make_unique<ConvBlock<T>>(widths_[l], widths_[l], 1, c.batch_norm, c.init, rng));
    this->add_child("up" + std::to_string(l), up_.back().get());
    this->add_child("dec" + std::to_string(l) + "a", dec_a_.back().get());
    this->add_child("dec" + std::to_string(l) + "b", dec_b_.back().get());
  }
  const int n_heads = c.deep_supervision ? static_cast<int>(c.ds_weights.size()) : 1;
  for (int h = 0; h < n_heads; ++h) {
    heads_.push_back(std::make_unique<nn::Conv3d<T>>(widths_[h], 1, 1, 1, 0, c.init, rng));
    this->add_child("head" + std::to_string(h), heads_.back().get());
  }
}

template <typename T>
ModelOutput<T> UNetReg<T>::run(const Tensor<T>& tissue, const Tensor<T>& theta) {
  const int L = this->config().unet.levels;
  std::vector<Tensor<T>> skips;
  Tensor<T> x = tissue;
  for (int l = 0; l <= L; ++l) {
    x = enc_b_[l]->forward(enc_a_[l]->forward(x));
    skips.push_back(x);
  }
  x = bottleneck_->forward(nn::concat<T>({x, param_->forward(theta)}, 1));
  // Decoder features by level, finest at index 0.
  std::vector<Tensor<T>> feats(static_cast<std::size_t>(L));
  for (int j = 0; j < L; ++j) {
    const int l = L - 1 - j;
    x = up_[j]->forward(nn::upsample_nearest2x(x));
    x = dec_b_[j]->forward(dec_a_[j]->forward(nn::concat<T>({x, skips[l]}, 1)));
    feats[l] = x;
  }
  ModelOutput<T> out;
  out.main = nn::sigmoid(heads_[0]->forward(feats[0]));
  for (std::size_t h = 1; h < heads_.size(); ++h) out.aux.push_back(nn::sigmoid(heads_[h]->forward(feats[h])));
  return out;
}

template <typename T>
ViT3d<T>::ViT3d(const ModelConfig& cfg, std::uint64_t seed) : ConditionedModel<T>(cfg) {
  cfg.vit.validate();
  const auto& c = cfg.vit;
  Rng rng(seed);
  const int p3 = c.patch * c.patch * c.patch;
  patch_embed_ = std::make_unique<nn::Linear<T>>(kTissueChannels * p3, c.dim, c.init, rng);
  this->add_child("patch_embed", patch_embed_.get());
  pos_ = this->add_parameter("pos", Tensor<T>(Shape{1, c.spatial_tokens(), c.dim}));
  nn::init_weight_(pos_, 1, nn::InitKind::normal_002, rng);
  param_embed_ = std::make_unique<nn::Linear<T>>(kParamCount, c.dim, c.init, rng);
  this->add_child("param_embed", param_embed_.get());
  for (int b = 0; b < c.depth; ++b) {
    blocks_.push_back(std::make_unique<nn::TransformerBlock<T>>(c.dim, c.heads, c.mlp_ratio, c.init, rng));
    this->add_child("block" + std::to_string(b), blocks_.back().get());
  }
  norm_ = std::make_unique<nn::LayerNorm<T>>(c.dim);
  this->add_child("norm", norm_.get());
  decoder_ = std::make_unique<nn::Linear<T>>(c.dim, p3, c.init, rng);
  this->add_child("decoder", decoder_.get());
}

template <typename T>
Tensor<T> ViT3d<T>::patchify(const Tensor<T>& tissue) const {
  const auto& c = this->config().vit;
  const int B = tissue.dim(0), C = tissue.dim(1), g = c.grid(), p = c.patch;
  auto x = nn::reshape(tissue, {B, C, g, p, g, p, g, p});
  x = nn::permute(x, {0, 2, 4, 6, 1, 3, 5, 7});
  return nn::reshape(x, {B, g * g * g, C * p * p * p});
}

template <typename T>
Tensor<T> ViT3d<T>::unpatchify(const Tensor<T>& patches) const {
  const auto& c = this->config().vit;
  const int B = patches.dim(0), g = c.grid(), p = c.patch;
  auto x = nn::reshape(patches, {B, g, g, g, p, p, p});
  x = nn::permute(x, {0, 1, 4, 2, 5, 3, 6});
  return nn::reshape(x, {B, 1, g * p, g * p, g * p});
}

template <typename T>
Tensor<T> ViT3d<T>::embed(const Tensor<T>& patches, const Tensor<T>& pos) const {
  auto tokens = patch_embed_->forward(patches);
  return nn::add(tokens, nn::broadcast_to(pos, tokens.shape()));
}

template <typename T>
Tensor<T> ViT3d<T>::run_tokens(const Tensor<T>& tokens, const Tensor<T>& theta) {
  const int B = tokens.dim(0), N = tokens.dim(1), D = tokens.dim(2);
  auto x = nn::concat<T>({nn::reshape(param_embed_->forward(theta), {B, 1, D}), tokens}, 1);
  for (auto& b : blocks_) x = b->forward(x);
  return nn::slice(norm_->forward(x), 1, 1, N);
}

template <typename T>
Tensor<T> ViT3d<T>::decode(const Tensor<T>& tokens) const {
  return decoder_->forward(tokens);
}

template <typename T>
ModelOutput<T> ViT3d<T>::run(const Tensor<T>& tissue, const Tensor<T>& theta) {
  const auto tokens = run_tokens(embed(patchify(tissue), pos_), theta);
  return {nn::sigmoid(unpatchify(decode(tokens))), {}};
}

template <typename T>
std::unique_ptr<ConditionedModel<T>> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  switch (cfg.arch) {
    case Arch::tumorsurrogate:
      return std::make_unique<TumorSurrogate<T>>(cfg, seed);
    case Arch::unet_reg:
      return std::make_unique<UNetReg<T>>(cfg, seed);
    case Arch::vit3d:
      return std::make_unique<ViT3d<T>>(cfg, seed);
  }
  throw Error(ErrorCode::config, "unknown architecture");
}

#define TUMORNET_INSTANTIATE_MODELS(T)                                                \
  template class ConditionedModel<T>;                                                 \
  template class ConvBlock<T>;                                                        \
  template class TumorSurrogate<T>;                                                   \
  template class UNetReg<T>;                                                          \
  template class ViT3d<T>;                                                            \
  template std::unique_ptr<ConditionedModel<T>> build_model(const ModelConfig&, std::uint64_t);

TUMORNET_INSTANTIATE_MODELS(float)
TUMORNET_INSTANTIATE_MODELS(double)

}  // namespace tumornet::models
