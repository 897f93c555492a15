#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tumornet/core/rng.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::nn {

enum class InitKind {
  kaiming_normal,  // N(0, 2 / fan_in), zero bias
  torch_default,   // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias
  normal_002,      // N(0, 0.02^2), zero bias
};

std::string to_string(InitKind k);
InitKind init_kind_from_string(const std::string& s);

template <typename T>
void kaiming_normal_(Tensor<T>& w, int fan_in, Rng& rng);
template <typename T>
void init_weight_(Tensor<T>& w, int fan_in, InitKind kind, Rng& rng);
template <typename T>
void init_bias_(Tensor<T>& b, int fan_in, InitKind kind, Rng& rng);

template <typename T>
using Named = std::pair<std::string, Tensor<T>>;

// Owner of parameters (trainable) and buffers (state saved with the weights).
// Children are registered by pointer and must outlive the parent, which in
// practice means they are members. Not copyable.
template <typename T>
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  // Dotted names in registration order.
  std::vector<Named<T>> parameters() const;
  std::vector<Named<T>> buffers() const;
  std::int64_t parameter_count() const;

  void train(bool on = true);
  void eval() { train(false); }
  bool training() const { return training_; }

  void zero_grad();
  void set_requires_grad(bool on);

 protected:
  Tensor<T>& add_parameter(const std::string& name, Tensor<T> t);
  void add_buffer(const std::string& name, Tensor<T> t);
  void add_child(const std::string& name, Module* m);

 private:
  void collect(const std::string& prefix, bool params, std::vector<Named<T>>& out) const;

  bool training_ = true;
  std::vector<Named<T>> params_;
  std::vector<Named<T>> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
};

template <typename T>
class Linear : public Module<T> {
 public:
  Linear(int in, int out, InitKind init, Rng& rng, bool bias = true);
  Tensor<T> forward(const Tensor<T>& x) const;
  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Tensor<T> weight, bias;

 private:
  int in_, out_;
};

template <typename T>
class Conv3d : public Module<T> {
 public:
  Conv3d(int cin, int cout, int kernel, int stride, int padding, InitKind init, Rng& rng, bool bias = true);
  Tensor<T> forward(const Tensor<T>& x) const;

  Tensor<T> weight, bias;
  int stride, padding;
};

template <typename T>
class BatchNorm : public Module<T> {
 public:
  explicit BatchNorm(int channels);
  Tensor<T> forward(const Tensor<T>& x);

  Tensor<T> gamma, beta;
  BatchNormState<T> state;
};

template <typename T>
class LayerNorm : public Module<T> {
 public:
  explicit LayerNorm(int dim);
  Tensor<T> forward(const Tensor<T>& x) const;

  Tensor<T> gamma, beta;
};

// Scaled dot-product self-attention over tokens (B, N, D).
template <typename T>
class MultiHeadAttention : public Module<T> {
 public:
  MultiHeadAttention(int dim, int heads, InitKind init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  int heads() const { return heads_; }

  Linear<T> qkv, proj;

 private:
  int dim_, heads_;
};

template <typename T>
class Mlp : public Module<T> {
 public:
  Mlp(int dim, int hidden, InitKind init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;

  Linear<T> fc1, fc2;
};

// Pre-norm block: x + attn(ln1(x)), then + mlp(ln2(.)).
template <typename T>
class TransformerBlock : public Module<T> {
 public:
  TransformerBlock(int dim, int heads, double mlp_ratio, InitKind init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x);

  LayerNorm<T> ln1;
  MultiHeadAttention<T> attn;
  LayerNorm<T> ln2;
  Mlp<T> mlp;
};

// conv3 (stride) -> [bn] -> relu -> conv3 -> [bn], plus a shortcut (identity,
// or 1x1 conv with the same stride and [bn] when the shape changes); relu.
template <typename T>
class ResBlock : public Module<T> {
 public:
  ResBlock(int cin, int cout, int stride, bool batch_norm, InitKind init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x);

 private:
  bool use_bn_;
  Conv3d<T> conv1_, conv2_;
  std::unique_ptr<BatchNorm<T>> bn1_, bn2_, bn_skip_;
  std::unique_ptr<Conv3d<T>> skip_;
};

// Projects theta (B, P) to `channels` feature maps on a cubic grid of side
// `grid`: linear P -> channels * grid^3, reshaped to (B, channels, g, g, g).
template <typename T>
class ParamProjection : public Module<T> {
 public:
  ParamProjection(int n_params, int channels, int grid, InitKind init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& theta) const;

  Linear<T> fc;

 private:
  int channels_, grid_;
};

extern template class Module<float>;
extern template class Module<double>;

}  // namespace tumornet::nn
