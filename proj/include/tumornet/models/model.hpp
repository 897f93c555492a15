#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tumornet/models/config.hpp"
#include "tumornet/nn/layers.hpp"

namespace tumornet::models {

template <typename T>
struct ModelOutput {
  nn::Tensor<T> main;              // (B, 1, n, n, n), sigmoid
  std::vector<nn::Tensor<T>> aux;  // deep-supervision heads, finest first
};

// Maps (tissue (B, 3, n, n, n) in wm/gm/csf order, theta_norm (B, 5)) to a
// concentration volume batch in [0, 1].
template <typename T>
class ConditionedModel : public nn::Module<T> {
 public:
  explicit ConditionedModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}

  const ModelConfig& config() const { return cfg_; }
  Arch arch() const { return cfg_.arch; }
  int input() const { return cfg_.input(); }

  ModelOutput<T> forward_all(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta);
  nn::Tensor<T> forward(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta) {
    return forward_all(tissue, theta).main;
  }

 protected:
  virtual ModelOutput<T> run(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta) = 0;

 private:
  ModelConfig cfg_;
};

// Plain conv3 -> [bn] -> relu.
template <typename T>
class ConvBlock : public nn::Module<T> {
 public:
  ConvBlock(int cin, int cout, int stride, bool batch_norm, nn::InitKind init, Rng& rng);
  nn::Tensor<T> forward(const nn::Tensor<T>& x);

 private:
  nn::Conv3d<T> conv_;
  std::unique_ptr<nn::BatchNorm<T>> bn_;
};

// Residual encoder (stride-2 ResBlocks), theta channels concatenated at the
// bottleneck, decoder of upsample + conv + ResBlock, sigmoid head. No skips
// from encoder to decoder.
template <typename T>
class TumorSurrogate : public ConditionedModel<T> {
 public:
  TumorSurrogate(const ModelConfig& cfg, std::uint64_t seed);

 protected:
  ModelOutput<T> run(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta) override;

 private:
  std::unique_ptr<ConvBlock<T>> stem_;
  std::vector<std::unique_ptr<nn::ResBlock<T>>> encoder_;
  std::unique_ptr<nn::ParamProjection<T>> param_;
  std::unique_ptr<nn::ResBlock<T>> bottleneck_;
  std::vector<std::unique_ptr<ConvBlock<T>>> up_;
  std::vector<std::unique_ptr<nn::ResBlock<T>>> decoder_;
  std::unique_ptr<nn::Conv3d<T>> head_;
};

// Encoder-decoder with concatenative skips at every level, theta at the
// bottleneck, 1x1 sigmoid heads on the finest decoder scales.
template <typename T>
class UNetReg : public ConditionedModel<T> {
 public:
  UNetReg(const ModelConfig& cfg, std::uint64_t seed);
  int head_count() const { return static_cast<int>(heads_.size()); }

 protected:
  ModelOutput<T> run(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta) override;

 private:
  std::vector<int> widths_;
  std::vector<std::unique_ptr<ConvBlock<T>>> enc_a_, enc_b_;
  std::unique_ptr<nn::ParamProjection<T>> param_;
  std::unique_ptr<ConvBlock<T>> bottleneck_;
  std::vector<std::unique_ptr<ConvBlock<T>>> up_, dec_a_, dec_b_;
  std::vector<std::unique_ptr<nn::Conv3d<T>>> heads_;  // finest first
};

// Patch tokens plus one parameter token through pre-norm transformer blocks;
// spatial tokens are decoded linearly back to patches.
template <typename T>
class ViT3d : public ConditionedModel<T> {
 public:
  ViT3d(const ModelConfig& cfg, std::uint64_t seed);

  // (B, 3, n, n, n) -> (B, g^3, 3 p^3), patches in row-major grid order.
  nn::Tensor<T> patchify(const nn::Tensor<T>& tissue) const;
  // (B, g^3, p^3) -> (B, 1, n, n, n)
  nn::Tensor<T> unpatchify(const nn::Tensor<T>& patches) const;
  // Patch rows -> tokens (B, g^3, dim) with positional embeddings `pos`
  // (1, g^3, dim) added.
  nn::Tensor<T> embed(const nn::Tensor<T>& patches, const nn::Tensor<T>& pos) const;
  // Prepends the parameter token, runs the blocks and the final norm, drops
  // the parameter token again: (B, g^3, dim).
  nn::Tensor<T> run_tokens(const nn::Tensor<T>& tokens, const nn::Tensor<T>& theta);
  // Tokens -> per-patch voxel logits (B, g^3, p^3).
  nn::Tensor<T> decode(const nn::Tensor<T>& tokens) const;

  const nn::Tensor<T>& positional() const { return pos_; }
  int token_count() const { return this->config().vit.spatial_tokens() + 1; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  int head_count() const { return blocks_.front()->attn.heads(); }

 protected:
  ModelOutput<T> run(const nn::Tensor<T>& tissue, const nn::Tensor<T>& theta) override;

 private:
  std::unique_ptr<nn::Linear<T>> patch_embed_, param_embed_, decoder_;
  nn::Tensor<T> pos_;
  std::vector<std::unique_ptr<nn::TransformerBlock<T>>> blocks_;
  std::unique_ptr<nn::LayerNorm<T>> norm_;
};

template <typename T>
std::unique_ptr<ConditionedModel<T>> build_model(const ModelConfig& cfg, std::uint64_t seed);

extern template class ConditionedModel<float>;
extern template class ConditionedModel<double>;

}  // namespace tumornet::models
