#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "tumornet/nn/tensor.hpp"

namespace tumornet::nn::detail {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<MatR<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatR<T>>;

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::shape_mismatch,
                std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
}

// Marks `out` as differentiable when the op has to be recorded.
template <typename T>
bool make_output(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs) {
  if (!recording<T>(inputs)) return false;
  out.set_requires_grad(true);
  return true;
}

inline std::vector<std::int64_t> strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size());
  std::int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

// Visits every index of `shape` in row-major order, passing the linear index
// and the offset sum(idx[i] * gather[i]).
template <typename F>
void for_each_strided(const Shape& shape, const std::vector<std::int64_t>& gather, F&& f) {
  const int r = static_cast<int>(shape.size());
  const std::int64_t n = shape_numel(shape);
  if (n == 0) return;
  if (r == 0) {
    f(0, 0);
    return;
  }
  std::vector<int> idx(r, 0);
  const int last = shape[r - 1];
  const std::int64_t step = gather[r - 1];
  std::int64_t base = 0, i = 0;
  while (i < n) {
    for (int k = 0; k < last; ++k) f(i++, base + k * step);
    int a = r - 2;
    for (; a >= 0; --a) {
      base += gather[a];
      if (++idx[a] < shape[a]) break;
      base -= gather[a] * shape[a];
      idx[a] = 0;
    }
    if (a < 0) break;
  }
}

}  // namespace tumornet::nn::detail
