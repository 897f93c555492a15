#include "tumornet/nn/layers.hpp"

#include <cmath>

namespace tumornet::nn {

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::kaiming_normal:
      return "kaiming_normal";
    case InitKind::torch_default:
      return "torch_default";
    case InitKind::normal_002:
      return "normal_002";
  }
  return "kaiming_normal";
}

InitKind init_kind_from_string(const std::string& s) {
  if (s == "kaiming_normal") return InitKind::kaiming_normal;
  if (s == "torch_default") return InitKind::torch_default;
  if (s == "normal_002") return InitKind::normal_002;
  throw Error(ErrorCode::config, "unknown init '" + s + "'");
}

template <typename T>
void kaiming_normal_(Tensor<T>& w, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  for (std::int64_t i = 0; i < w.numel(); ++i) w.value()[i] = static_cast<T>(sd * standard_normal(rng));
}

template <typename T>
void init_weight_(Tensor<T>& w, int fan_in, InitKind kind, Rng& rng) {
  switch (kind) {
    case InitKind::kaiming_normal:
      kaiming_normal_(w, fan_in, rng);
      return;
    case InitKind::torch_default: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::int64_t i = 0; i < w.numel(); ++i) w.value()[i] = static_cast<T>(uniform(rng, -bound, bound));
      return;
    }
    case InitKind::normal_002:
      for (std::int64_t i = 0; i < w.numel(); ++i) w.value()[i] = static_cast<T>(0.02 * standard_normal(rng));
      return;
  }
}

template <typename T>
void init_bias_(Tensor<T>& b, int fan_in, InitKind kind, Rng& rng) {
  if (kind == InitKind::torch_default) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < b.numel(); ++i) b.value()[i] = static_cast<T>(uniform(rng, -bound, bound));
  } else {
    b.value().setZero();
  }
}

template <typename T>
void Module<T>::collect(const std::string& prefix, bool params, std::vector<Named<T>>& out) const {
  for (const auto& [name, t] : params ? params_ : buffers_) out.emplace_back(prefix + name, t);
  for (const auto& [name, child] : children_) child->collect(prefix + name + ".", params, out);
}

template <typename T>
std::vector<Named<T>> Module<T>::parameters() const {
  std::vector<Named<T>> out;
  collect("", true, out);
  return out;
}

template <typename T>
std::vector<Named<T>> Module<T>::buffers() const {
  std::vector<Named<T>> out;
  collect("", false, out);
  return out;
}

template <typename T>
std::int64_t Module<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

template <typename T>
void Module<T>::train(bool on) {
  training_ = on;
  for (auto& [name, child] : children_) child->train(on);
}

template <typename T>
void Module<T>::zero_grad() {
  for (auto& [name, t] : parameters()) t.zero_grad();
}

template <typename T>
void Module<T>::set_requires_grad(bool on) {
  for (auto& [name, t] : parameters()) t.set_requires_grad(on);
}

template <typename T>
Tensor<T>& Module<T>::add_parameter(const std::string& name, Tensor<T> t) {
  t.set_requires_grad(true);
  params_.emplace_back(name, t);
  return params_.back().second;
}

template <typename T>
void Module<T>::add_buffer(const std::string& name, Tensor<T> t) {
  buffers_.emplace_back(name, t);
}

template <typename T>
void Module<T>::add_child(const std::string& name, Module* m) {
  children_.emplace_back(name, m);
}

template <typename T>
Linear<T>::Linear(int in, int out, InitKind init, Rng& rng, bool with_bias) : in_(in), out_(out) {
  if (in <= 0 || out <= 0) throw Error(ErrorCode::invalid_argument, "Linear needs positive feature counts");
  weight = this->add_parameter("weight", Tensor<T>(Shape{out, in}));
  init_weight_(weight, in, init, rng);
  if (with_bias) {
    bias = this->add_parameter("bias", Tensor<T>(Shape{out}));
    init_bias_(bias, in, init, rng);
  }
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  return linear(x, weight, bias.defined() ? &bias : nullptr);
}

template <typename T>
Conv3d<T>::Conv3d(int cin, int cout, int kernel, int stride_, int padding_, InitKind init, Rng& rng, bool with_bias)
    : stride(stride_), padding(padding_) {
  if (cin <= 0 || cout <= 0 || kernel <= 0) throw Error(ErrorCode::invalid_argument, "Conv3d needs positive sizes");
  const int fan_in = cin * kernel * kernel * kernel;
  weight = this->add_parameter("weight", Tensor<T>(Shape{cout, cin, kernel, kernel, kernel}));
  init_weight_(weight, fan_in, init, rng);
  if (with_bias) {
    bias = this->add_parameter("bias", Tensor<T>(Shape{cout}));
    init_bias_(bias, fan_in, init, rng);
  }
}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& x) const {
  return conv3d(x, weight, bias.defined() ? &bias : nullptr, stride, padding);
}

template <typename T>
BatchNorm<T>::BatchNorm(int channels) : state(channels) {
  gamma = this->add_parameter("gamma", Tensor<T>(Shape{channels}, T(1)));
  beta = this->add_parameter("beta", Tensor<T>(Shape{channels}, T(0)));
  this->add_buffer("running_mean", state.running_mean);
  this->add_buffer("running_var", state.running_var);
  this->add_buffer("updates", state.updates);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x) {
  return batch_norm(x, gamma, beta, state, this->training());
}

template <typename T>
LayerNorm<T>::LayerNorm(int dim) {
  gamma = this->add_parameter("gamma", Tensor<T>(Shape{dim}, T(1)));
  beta = this->add_parameter("beta", Tensor<T>(Shape{dim}, T(0)));
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gamma, beta);
}

namespace {
int checked_heads(int dim, int heads) {
  if (heads <= 0 || dim % heads != 0) {
    throw Error(ErrorCode::invalid_argument,
                "embedding dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  }
  return heads;
}
}  // namespace

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(int dim, int heads, InitKind init, Rng& rng)
    : qkv(dim, 3 * dim, init, (checked_heads(dim, heads), rng)), proj(dim, dim, init, rng), dim_(dim), heads_(heads) {
  this->add_child("qkv", &qkv);
  this->add_child("proj", &proj);
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(2) != dim_) {
    throw Error(ErrorCode::shape_mismatch, "attention expects (B, N, " + std::to_string(dim_) + "), got " + shape_string(x.shape()));
  }
  const int B = x.dim(0), N = x.dim(1), H = heads_, Dh = dim_ / heads_;
  // (B, N, 3, H, Dh) -> (3, B, H, N, Dh)
  const auto qkv5 = permute(reshape(qkv.forward(x), {B, N, 3, H, Dh}), {2, 0, 3, 1, 4});
  const auto q = reshape(slice(qkv5, 0, 0, 1), {B, H, N, Dh});
  const auto k = reshape(slice(qkv5, 0, 1, 1), {B, H, N, Dh});
  const auto v = reshape(slice(qkv5, 0, 2, 1), {B, H, N, Dh});
  const T scale = T(1) / std::sqrt(static_cast<T>(Dh));
  const auto att = softmax(mul_scalar(matmul(q, permute(k, {0, 1, 3, 2})), scale), -1);
  const auto ctx = reshape(permute(matmul(att, v), {0, 2, 1, 3}), {B, N, dim_});
  return proj.forward(ctx);
}

template <typename T>
Mlp<T>::Mlp(int dim, int hidden, InitKind init, Rng& rng) : fc1(dim, hidden, init, rng), fc2(hidden, dim, init, rng) {
  this->add_child("fc1", &fc1);
  this->add_child("fc2", &fc2);
}

template <typename T>
Tensor<T> Mlp<T>::forward(const Tensor<T>& x) const {
  return fc2.forward(gelu(fc1.forward(x)));
}

template <typename T>
TransformerBlock<T>::TransformerBlock(int dim, int heads, double mlp_ratio, InitKind init, Rng& rng)
    : ln1(dim),
      attn(dim, heads, init, rng),
      ln2(dim),
      mlp(dim, static_cast<int>(std::lround(dim * mlp_ratio)), init, rng) {
  this->add_child("ln1", &ln1);
  this->add_child("attn", &attn);
  this->add_child("ln2", &ln2);
  this->add_child("mlp", &mlp);
}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x) {
  const auto h = add(x, attn.forward(ln1.forward(x)));
  return add(h, mlp.forward(ln2.forward(h)));
}

template <typename T>
ResBlock<T>::ResBlock(int cin, int cout, int stride, bool batch_norm, InitKind init, Rng& rng)
    : use_bn_(batch_norm),
      conv1_(cin, cout, 3, stride, 1, init, rng, !batch_norm),
      conv2_(cout, cout, 3, 1, 1, init, rng, !batch_norm) {
  this->add_child("conv1", &conv1_);
  if (use_bn_) {
    bn1_ = std::make_unique<BatchNorm<T>>(cout);
    this->add_child("bn1", bn1_.get());
  }
  this->add_child("conv2", &conv2_);
  if (use_bn_) {
    bn2_ = std::make_unique<BatchNorm<T>>(cout);
    this->add_child("bn2", bn2_.get());
  }
  if (cin != cout || stride != 1) {
    skip_ = std::make_unique<Conv3d<T>>(cin, cout, 1, stride, 0, init, rng, !batch_norm);
    this->add_child("skip", skip_.get());
    if (use_bn_) {
      bn_skip_ = std::make_unique<BatchNorm<T>>(cout);
      this->add_child("bn_skip", bn_skip_.get());
    }
  }
}

template <typename T>
Tensor<T> ResBlock<T>::forward(const Tensor<T>& x) {
  auto h = conv1_.forward(x);
  if (use_bn_) h = bn1_->forward(h);
  h = conv2_.forward(relu(h));
  if (use_bn_) h = bn2_->forward(h);
  Tensor<T> s = x;
  if (skip_) {
    s = skip_->forward(x);
    if (use_bn_) s = bn_skip_->forward(s);
  }
  return relu(add(h, s));
}

template <typename T>
ParamProjection<T>::ParamProjection(int n_params, int channels, int grid, InitKind init, Rng& rng)
    : fc(n_params, channels * grid * grid * grid, init, rng), channels_(channels), grid_(grid) {
  this->add_child("fc", &fc);
}

template <typename T>
Tensor<T> ParamProjection<T>::forward(const Tensor<T>& theta) const {
  return reshape(fc.forward(theta), {theta.dim(0), channels_, grid_, grid_, grid_});
}

#define TUMORNET_INSTANTIATE_LAYERS(T)                          \
  template void kaiming_normal_(Tensor<T>&, int, Rng&);         \
  template void init_weight_(Tensor<T>&, int, InitKind, Rng&);  \
  template void init_bias_(Tensor<T>&, int, InitKind, Rng&);    \
  template class Module<T>;                                     \
  template class Linear<T>;                                     \
  template class Conv3d<T>;                                     \
  template class BatchNorm<T>;                                  \
  template class LayerNorm<T>;                                  \
  template class MultiHeadAttention<T>;                         \
  template class Mlp<T>;                                        \
  template class TransformerBlock<T>;                           \
  template class ResBlock<T>;                                   \
  template class ParamProjection<T>;

TUMORNET_INSTANTIATE_LAYERS(float)
TUMORNET_INSTANTIATE_LAYERS(double)

}  // namespace tumornet::nn
