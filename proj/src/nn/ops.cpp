#include "tumornet/nn/ops.hpp"

#include <cmath>
#include <numeric>

#include "tumornet/nn/detail.hpp"

namespace tumornet::nn {

using detail::make_output;
using detail::require_same_shape;

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out(a.shape(), a.value() + b.value());
  if (make_output(out, {&a, &b})) {
    record<T>([an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      if (an->requires_grad) an->grad_buffer() += on->grad;
      if (bn->requires_grad) bn->grad_buffer() += on->grad;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  Tensor<T> out(a.shape(), a.value() - b.value());
  if (make_output(out, {&a, &b})) {
    record<T>([an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      if (an->requires_grad) an->grad_buffer() += on->grad;
      if (bn->requires_grad) bn->grad_buffer() -= on->grad;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.shape(), a.value() * b.value());
  if (make_output(out, {&a, &b})) {
    record<T>([an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      if (an->requires_grad) an->grad_buffer() += on->grad * bn->value;
      if (bn->requires_grad) bn->grad_buffer() += on->grad * an->value;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape(), a.value() + s);
  if (make_output(out, {&a})) {
    record<T>([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      an->grad_buffer() += on->grad;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape(), a.value() * s);
  if (make_output(out, {&a})) {
    record<T>([an = a.node(), on = out.node(), s] {
      if (on->grad.size() == 0) return;
      an->grad_buffer() += on->grad * s;
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  using detail::MatMap;
  using detail::ConstMatMap;
  if (a.rank() < 2 || b.rank() < 2) {
    throw Error(ErrorCode::shape_mismatch, "matmul needs rank >= 2 operands, got " + shape_string(a.shape()) + " and " +
                                               shape_string(b.shape()));
  }
  const int M = a.dim(-2), K = a.dim(-1);
  const int N = b.dim(-1);
  const bool shared_b = b.rank() == 2;
  bool ok = b.dim(-2) == K;
  if (!shared_b) {
    ok = ok && b.rank() == a.rank() &&
         std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin(), b.shape().end() - 2);
  }
  if (!ok) {
    throw Error(ErrorCode::shape_mismatch,
                "matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::int64_t batch = a.numel() / (static_cast<std::int64_t>(M) * K);
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(N);
  Tensor<T> out(out_shape);
  if (shared_b) {
    MatMap<T>(out.data(), batch * M, N).noalias() =
        ConstMatMap<T>(a.data(), batch * M, K) * ConstMatMap<T>(b.data(), K, N);
  } else {
    for (std::int64_t i = 0; i < batch; ++i) {
      MatMap<T>(out.data() + i * M * N, M, N).noalias() =
          ConstMatMap<T>(a.data() + i * M * K, M, K) * ConstMatMap<T>(b.data() + i * K * N, K, N);
    }
  }
  if (make_output(out, {&a, &b})) {
    record<T>([an = a.node(), bn = b.node(), on = out.node(), M, K, N, batch, shared_b] {
      if (on->grad.size() == 0) return;
      const T* g = on->grad.data();
      if (shared_b) {
        ConstMatMap<T> G(g, batch * M, N);
        if (an->requires_grad) {
          MatMap<T>(an->grad_buffer().data(), batch * M, K).noalias() +=
              G * ConstMatMap<T>(bn->value.data(), K, N).transpose();
        }
        if (bn->requires_grad) {
          MatMap<T>(bn->grad_buffer().data(), K, N).noalias() +=
              ConstMatMap<T>(an->value.data(), batch * M, K).transpose() * G;
        }
        return;
      }
      for (std::int64_t i = 0; i < batch; ++i) {
        ConstMatMap<T> G(g + i * M * N, M, N);
        if (an->requires_grad) {
          MatMap<T>(an->grad_buffer().data() + i * M * K, M, K).noalias() +=
              G * ConstMatMap<T>(bn->value.data() + i * K * N, K, N).transpose();
        }
        if (bn->requires_grad) {
          MatMap<T>(bn->grad_buffer().data() + i * K * N, K, N).noalias() +=
              ConstMatMap<T>(an->value.data() + i * M * K, M, K).transpose() * G;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b) {
  using detail::MatMap;
  using detail::ConstMatMap;
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(1) || (b && (b->rank() != 1 || b->dim(0) != w.dim(0)))) {
    throw Error(ErrorCode::shape_mismatch, "linear: input " + shape_string(x.shape()) + ", weight " +
                                               shape_string(w.shape()) +
                                               (b ? ", bias " + shape_string(b->shape()) : std::string()));
  }
  const int in = w.dim(1), outf = w.dim(0);
  const std::int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outf;
  Tensor<T> out(out_shape);
  MatMap<T> Y(out.data(), rows, outf);
  Y.noalias() = ConstMatMap<T>(x.data(), rows, in) * ConstMatMap<T>(w.data(), outf, in).transpose();
  if (b) Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b->data(), outf);
  if (make_output(out, {&x, &w, b})) {
    record<T>([xn = x.node(), wn = w.node(), bn = b ? b->node() : nullptr, on = out.node(), in, outf, rows] {
      if (on->grad.size() == 0) return;
      ConstMatMap<T> G(on->grad.data(), rows, outf);
      if (xn->requires_grad) {
        MatMap<T>(xn->grad_buffer().data(), rows, in).noalias() += G * ConstMatMap<T>(wn->value.data(), outf, in);
      }
      if (wn->requires_grad) {
        MatMap<T>(wn->grad_buffer().data(), outf, in).noalias() +=
            G.transpose() * ConstMatMap<T>(xn->value.data(), rows, in);
      }
      if (bn && bn->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bn->grad_buffer().data(), outf) += G.colwise().sum();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  int infer = -1;
  std::int64_t known = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw Error(ErrorCode::shape_mismatch, "reshape: more than one -1 in " + shape_string(shape));
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0) shape[infer] = static_cast<int>(x.numel() / known);
  if (shape_numel(shape) != x.numel()) {
    throw Error(ErrorCode::shape_mismatch, "reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Tensor<T> out(shape, x.value());
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      xn->grad_buffer() += on->grad;
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
  const int r = x.rank();
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  bool ok = static_cast<int>(perm.size()) == r;
  for (int p : perm) {
    ok = ok && p >= 0 && p < r && !seen[p];
    if (ok) seen[p] = true;
  }
  if (!ok) throw Error(ErrorCode::invalid_argument, "permute: invalid permutation for " + shape_string(x.shape()));
  const auto in_strides = detail::strides(x.shape());
  Shape out_shape(r);
  std::vector<std::int64_t> gather(r);
  for (int i = 0; i < r; ++i) {
    out_shape[i] = x.shape()[perm[i]];
    gather[i] = in_strides[perm[i]];
  }
  Tensor<T> out(out_shape);
  T* o = out.data();
  const T* in = x.data();
  detail::for_each_strided(out_shape, gather, [&](std::int64_t i, std::int64_t off) { o[i] = in[off]; });
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), out_shape, gather] {
      if (on->grad.size() == 0) return;
      T* gx = xn->grad_buffer().data();
      const T* g = on->grad.data();
      detail::for_each_strided(out_shape, gather, [&](std::int64_t i, std::int64_t off) { gx[off] += g[i]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  const int r = static_cast<int>(shape.size());
  const int lead = r - x.rank();
  if (lead < 0) throw Error(ErrorCode::shape_mismatch, "cannot broadcast " + shape_string(x.shape()) + " to " + shape_string(shape));
  const auto in_strides = detail::strides(x.shape());
  std::vector<std::int64_t> gather(r, 0);
  for (int i = lead; i < r; ++i) {
    const int d = x.shape()[i - lead];
    if (d == shape[i]) {
      gather[i] = in_strides[i - lead];
    } else if (d != 1) {
      throw Error(ErrorCode::shape_mismatch, "cannot broadcast " + shape_string(x.shape()) + " to " + shape_string(shape));
    }
  }
  Tensor<T> out(shape);
  T* o = out.data();
  const T* in = x.data();
  detail::for_each_strided(shape, gather, [&](std::int64_t i, std::int64_t off) { o[i] = in[off]; });
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), shape, gather] {
      if (on->grad.size() == 0) return;
      T* gx = xn->grad_buffer().data();
      const T* g = on->grad.data();
      detail::for_each_strided(shape, gather, [&](std::int64_t i, std::int64_t off) { gx[off] += g[i]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw Error(ErrorCode::invalid_argument, "concat of nothing");
  const int r = xs[0].rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw Error(ErrorCode::invalid_argument, "concat: bad axis for " + shape_string(xs[0].shape()));
  Shape out_shape = xs[0].shape();
  out_shape[axis] = 0;
  for (const auto& x : xs) {
    bool ok = x.rank() == r;
    for (int i = 0; ok && i < r; ++i) ok = i == axis || x.shape()[i] == xs[0].shape()[i];
    if (!ok) {
      throw Error(ErrorCode::shape_mismatch, "concat: " + shape_string(x.shape()) + " vs " + shape_string(xs[0].shape()) +
                                                 " along axis " + std::to_string(axis));
    }
    out_shape[axis] += x.shape()[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];
  const std::int64_t out_row = out_shape[axis] * inner;
  Tensor<T> out(out_shape);
  std::vector<std::int64_t> offsets;
  std::int64_t col = 0;
  for (const auto& x : xs) {
    offsets.push_back(col);
    const std::int64_t row = x.shape()[axis] * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(x.data() + o * row, row, out.data() + o * out_row + col);
    }
    col += row;
  }
  bool any = false;
  for (const auto& x : xs) any = any || x.requires_grad();
  if (Tape<T>::active() && any) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    record<T>([nodes, on = out.node(), offsets, outer, out_row] {
      if (on->grad.size() == 0) return;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        auto& n = *nodes[k];
        if (!n.requires_grad) continue;
        const std::int64_t row = n.value.size() / outer;
        T* g = n.grad_buffer().data();
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = on->grad.data() + o * out_row + offsets[k];
          for (std::int64_t j = 0; j < row; ++j) g[o * row + j] += src[j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int start, int length) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r || start < 0 || length < 0 || start + length > x.shape()[axis]) {
    throw Error(ErrorCode::invalid_argument, "slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                                                 ") out of range for " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];
  const std::int64_t in_row = static_cast<std::int64_t>(x.shape()[axis]) * inner;
  const std::int64_t row = static_cast<std::int64_t>(length) * inner;
  const std::int64_t off = static_cast<std::int64_t>(start) * inner;
  Tensor<T> out(out_shape);
  for (std::int64_t o = 0; o < outer; ++o) std::copy_n(x.data() + o * in_row + off, row, out.data() + o * row);
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), outer, in_row, row, off] {
      if (on->grad.size() == 0) return;
      T* g = xn->grad_buffer().data();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < row; ++j) g[o * in_row + off + j] += on->grad[o * row + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(x.value().sum());
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      xn->grad_buffer() += on->grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw Error(ErrorCode::invalid_argument, "mean of an empty tensor");
  const T inv = T(1) / static_cast<T>(x.numel());
  Tensor<T> out = Tensor<T>::scalar(x.value().sum() * inv);
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), inv] {
      if (on->grad.size() == 0) return;
      xn->grad_buffer() += on->grad[0] * inv;
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape(), x.value().max(T(0)));
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      xn->grad_buffer() += (xn->value > T(0)).select(on->grad, T(0));
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(0.70710678118654752440);
  typename Tensor<T>::Array y(x.numel());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    y[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  }
  Tensor<T> out(x.shape(), std::move(y));
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), inv_sqrt2] {
      if (on->grad.size() == 0) return;
      const T inv_sqrt2pi = T(0.39894228040143267794);
      auto& g = xn->grad_buffer();
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const T v = xn->value[i];
        const T d = T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        g[i] += on->grad[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape(), T(1) / (T(1) + (-x.value()).exp()));
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      xn->grad_buffer() += on->grad * on->value * (T(1) - on->value);
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw Error(ErrorCode::invalid_argument, "softmax: bad axis for " + shape_string(x.shape()));
  std::int64_t outer = 1, inner = 1;
  const int n = x.shape()[axis];
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < r; ++i) inner *= x.shape()[i];
  Tensor<T> out(x.shape());
  const T* in = x.data();
  T* y = out.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t j = 0; j < inner; ++j) {
      const std::int64_t base = o * n * inner + j;
      T mx = in[base];
      for (int k = 1; k < n; ++k) mx = std::max(mx, in[base + k * inner]);
      T s = 0;
      for (int k = 0; k < n; ++k) {
        const T e = std::exp(in[base + k * inner] - mx);
        y[base + k * inner] = e;
        s += e;
      }
      const T inv = T(1) / s;
      for (int k = 0; k < n; ++k) y[base + k * inner] *= inv;
    }
  }
  if (make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), outer, inner, n] {
      if (on->grad.size() == 0) return;
      T* gx = xn->grad_buffer().data();
      const T* g = on->grad.data();
      const T* y = on->value.data();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < inner; ++j) {
          const std::int64_t base = o * n * inner + j;
          T dot = 0;
          for (int k = 0; k < n; ++k) dot += g[base + k * inner] * y[base + k * inner];
          for (int k = 0; k < n; ++k) gx[base + k * inner] += y[base + k * inner] * (g[base + k * inner] - dot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const int D = x.dim(-1);
  if (gamma.numel() != D || beta.numel() != D) {
    throw Error(ErrorCode::shape_mismatch, "layer_norm: input " + shape_string(x.shape()) + ", gamma " +
                                               shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()));
  }
  const std::int64_t rows = x.numel() / D;
  auto xhat = std::make_shared<typename Tensor<T>::Array>(x.numel());
  auto inv_std = std::make_shared<typename Tensor<T>::Array>(rows);
  Tensor<T> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * D;
    T m = 0;
    for (int k = 0; k < D; ++k) m += xr[k];
    m /= D;
    T v = 0;
    for (int k = 0; k < D; ++k) v += (xr[k] - m) * (xr[k] - m);
    v /= D;
    const T is = T(1) / std::sqrt(v + eps);
    (*inv_std)[r] = is;
    for (int k = 0; k < D; ++k) {
      const T h = (xr[k] - m) * is;
      (*xhat)[r * D + k] = h;
      out.data()[r * D + k] = h * gamma[k] + beta[k];
    }
  }
  if (make_output(out, {&x, &gamma, &beta})) {
    record<T>([xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(), xhat, inv_std, rows, D] {
      if (on->grad.size() == 0) return;
      const T* g = on->grad.data();
      if (gn->requires_grad || bn->requires_grad) {
        auto& gg = gn->grad_buffer();
        auto& gb = bn->grad_buffer();
        for (std::int64_t r = 0; r < rows; ++r) {
          for (int k = 0; k < D; ++k) {
            gg[k] += g[r * D + k] * (*xhat)[r * D + k];
            gb[k] += g[r * D + k];
          }
        }
      }
      if (!xn->requires_grad) return;
      T* gx = xn->grad_buffer().data();
      for (std::int64_t r = 0; r < rows; ++r) {
        T s1 = 0, s2 = 0;
        for (int k = 0; k < D; ++k) {
          const T dh = g[r * D + k] * gn->value[k];
          s1 += dh;
          s2 += dh * (*xhat)[r * D + k];
        }
        s1 /= D;
        s2 /= D;
        for (int k = 0; k < D; ++k) {
          const T dh = g[r * D + k] * gn->value[k];
          gx[r * D + k] += (*inv_std)[r] * (dh - s1 - (*xhat)[r * D + k] * s2);
        }
      }
    });
  }
  return out;
}

template <typename T>
BatchNormState<T>::BatchNormState(int channels)
    : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)), updates(Shape{1}, T(0)) {}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training) {
  if (x.rank() < 2) throw Error(ErrorCode::shape_mismatch, "batch_norm needs a channel axis, got " + shape_string(x.shape()));
  const int B = x.dim(0), C = x.dim(1);
  if (gamma.numel() != C || beta.numel() != C || state.running_mean.numel() != C) {
    throw Error(ErrorCode::shape_mismatch, "batch_norm: " + std::to_string(C) + " channels but gamma " +
                                               shape_string(gamma.shape()) + ", state " +
                                               shape_string(state.running_mean.shape()));
  }
  const std::int64_t S = x.numel() / (static_cast<std::int64_t>(B) * C);
  const std::int64_t count = static_cast<std::int64_t>(B) * S;
  typename Tensor<T>::Array mu(C), inv_std(C);
  if (training) {
    if (count < 2) throw Error(ErrorCode::invalid_argument, "batch_norm training needs more than one value per channel");
    for (int c = 0; c < C; ++c) {
      T m = 0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * S;
        for (std::int64_t s = 0; s < S; ++s) m += p[s];
      }
      m /= static_cast<T>(count);
      T v = 0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * S;
        for (std::int64_t s = 0; s < S; ++s) v += (p[s] - m) * (p[s] - m);
      }
      const T var_unbiased = v / static_cast<T>(count - 1);
      v /= static_cast<T>(count);
      mu[c] = m;
      inv_std[c] = T(1) / std::sqrt(v + state.eps);
      state.running_mean.value()[c] = (T(1) - state.momentum) * state.running_mean.value()[c] + state.momentum * m;
      state.running_var.value()[c] =
          (T(1) - state.momentum) * state.running_var.value()[c] + state.momentum * var_unbiased;
    }
    state.updates.value()[0] += T(1);
  } else {
    if (state.updates.value()[0] <= T(0)) {
      throw Error(ErrorCode::uninitialized_stats, "batch_norm in eval mode: uninitialized running stats");
    }
    mu = state.running_mean.value();
    inv_std = T(1) / (state.running_var.value() + state.eps).sqrt();
  }
  auto xhat = std::make_shared<typename Tensor<T>::Array>(x.numel());
  Tensor<T> out(x.shape());
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * S;
      for (std::int64_t s = 0; s < S; ++s) {
        const T h = (x.data()[base + s] - mu[c]) * inv_std[c];
        (*xhat)[base + s] = h;
        out.data()[base + s] = h * gamma[c] + beta[c];
      }
    }
  }
  if (make_output(out, {&x, &gamma, &beta})) {
    record<T>([xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(), xhat, inv_std, B, C, S, count,
               training] {
      if (on->grad.size() == 0) return;
      const T* g = on->grad.data();
      typename Tensor<T>::Array sg = Tensor<T>::Array::Zero(C), sgh = Tensor<T>::Array::Zero(C);
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * S;
          for (std::int64_t s = 0; s < S; ++s) {
            sg[c] += g[base + s];
            sgh[c] += g[base + s] * (*xhat)[base + s];
          }
        }
      }
      if (gn->requires_grad) gn->grad_buffer() += sgh;
      if (bn->requires_grad) bn->grad_buffer() += sg;
      if (!xn->requires_grad) return;
      T* gx = xn->grad_buffer().data();
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * S;
          const T k = gn->value[c] * inv_std[c];
          if (training) {
            const T m1 = sg[c] / static_cast<T>(count), m2 = sgh[c] / static_cast<T>(count);
            for (std::int64_t s = 0; s < S; ++s) gx[base + s] += k * (g[base + s] - m1 - (*xhat)[base + s] * m2);
          } else {
            for (std::int64_t s = 0; s < S; ++s) gx[base + s] += k * g[base + s];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape("mse_loss", pred, target);
  if (pred.numel() == 0) throw Error(ErrorCode::invalid_argument, "mse_loss of empty tensors");
  const T inv = T(1) / static_cast<T>(pred.numel());
  Tensor<T> out = Tensor<T>::scalar((pred.value() - target.value()).square().sum() * inv);
  if (make_output(out, {&pred, &target})) {
    record<T>([pn = pred.node(), tn = target.node(), on = out.node(), inv] {
      if (on->grad.size() == 0) return;
      const T k = T(2) * inv * on->grad[0];
      if (pn->requires_grad) pn->grad_buffer() += k * (pn->value - tn->value);
      if (tn->requires_grad) tn->grad_buffer() -= k * (pn->value - tn->value);
    });
  }
  return out;
}

template <typename T>
Tensor<T> masked_mse(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask) {
  require_same_shape("masked_mse", pred, target);
  require_same_shape("masked_mse", pred, mask);
  const auto ind = (mask.value() != T(0)).template cast<T>().eval();
  const T n = ind.sum();
  if (n == T(0)) throw Error(ErrorCode::invalid_argument, "masked_mse: empty mask");
  const T inv = T(1) / n;
  Tensor<T> out = Tensor<T>::scalar(((pred.value() - target.value()).square() * ind).sum() * inv);
  if (make_output(out, {&pred, &target})) {
    record<T>([pn = pred.node(), tn = target.node(), on = out.node(), ind, inv] {
      if (on->grad.size() == 0) return;
      const T k = T(2) * inv * on->grad[0];
      if (pn->requires_grad) pn->grad_buffer() += k * (pn->value - tn->value) * ind;
      if (tn->requires_grad) tn->grad_buffer() -= k * (pn->value - tn->value) * ind;
    });
  }
  return out;
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return x.clone();
}

#define TUMORNET_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                          \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                                       \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                               \
  template Tensor<T> slice(const Tensor<T>&, int, int, int);                                                   \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                      \
  template struct BatchNormState<T>;                                                                           \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormState<T>&, bool); \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> masked_mse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> detach(const Tensor<T>&);

TUMORNET_INSTANTIATE_OPS(float)
TUMORNET_INSTANTIATE_OPS(double)

}  // namespace tumornet::nn
