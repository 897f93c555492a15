#pragma once

#include <optional>
#include <vector>

#include "tumornet/nn/tensor.hpp"

namespace tumornet::nn {

// Elementwise ops require identical shapes; use broadcast_to explicitly.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);

// a (..., M, K) times b (K, N) or (..., K, N) with matching leading axes.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// y = x W^T + b with x (..., in), W (out, in), b (out).
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b);

// One extent may be -1.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
// Output axis i is input axis perm[i].
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm);
// Numpy broadcasting: leading axes are added, extents of 1 are repeated.
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis);
template <typename T> Tensor<T> slice(const Tensor<T>& x, int axis, int start, int length);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
// Exact (erf) form.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

// x (B, Cin, s0, s1, s2), w (Cout, Cin, k, k, k), b (Cout). Cross-correlation
// with zero padding; output extent floor((n + 2p - k) / s) + 1.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride, int padding);
template <typename T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool2x(const Tensor<T>& x);

// Normalizes over the last axis, then scales by gamma and shifts by beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  Tensor<T> updates;  // one element; number of training batches seen
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormState(int channels = 0);
};

// Channel axis 1. Training mode normalizes with the batch statistics (biased
// variance) and folds them into the running averages (unbiased variance);
// eval mode uses the running averages and throws if none were ever recorded.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training);

template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);
// Mean squared error over voxels where mask != 0.
template <typename T> Tensor<T> masked_mse(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask);

template <typename T> Tensor<T> detach(const Tensor<T>& x);

}  // namespace tumornet::nn
