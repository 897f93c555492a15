#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "tumornet/core/error.hpp"

namespace tumornet::nn {

using Shape = std::vector<int>;

std::string shape_string(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Storage behind a Tensor handle. Row-major, last axis fastest. Volumetric
// tensors are (batch, channel, s0, s1, s2) where s2 is the fastest axis, so a
// field::Volume3 (x fastest) maps onto s0 = z, s1 = y, s2 = x without copying
// order.
template <typename T>
struct TensorNode {
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  Shape shape;
  Array value;
  Array grad;  // empty until something flows into it
  bool requires_grad = false;

  // Lazily sized gradient buffer.
  Array& grad_buffer() {
    if (grad.size() != value.size()) grad = Array::Zero(value.size());
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using Array = typename TensorNode<T>::Array;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, Array values);

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }
  static Tensor from(Shape shape, std::initializer_list<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  // Negative axes count from the end.
  int dim(int axis) const;
  std::int64_t numel() const { return node_->value.size(); }

  Array& value() { return node_->value; }
  const Array& value() const { return node_->value; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }
  T item() const;
  T operator[](std::int64_t i) const { return node_->value[i]; }

  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->value.size() > 0; }
  const Array& grad() const { return node_->grad; }
  Array& grad() { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  // Same values in fresh storage, no gradient history.
  Tensor clone() const { return Tensor(node_->shape, node_->value); }

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }
  bool same_node(const Tensor& o) const { return node_ == o.node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Ordered log of differentiable operations. Only the tape installed with a
// TapeScope on the current thread records; with none active every op is
// evaluated eagerly without history.
template <typename T>
class Tape {
 public:
  static Tape* active();

  void push(std::function<void()> backward_rule) { records_.push_back(std::move(backward_rule)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Seeds d loss = 1 and runs every recorded rule once, newest first. The tape
  // is cleared afterwards. Throws for a non-scalar loss.
  void backward(const Tensor<T>& loss);

 private:
  std::vector<std::function<void()>> records_;
};

template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// True when an op on these inputs has to be recorded.
template <typename T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(std::function<void()> rule) {
  Tape<T>::active()->push(std::move(rule));
}

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class TapeScope<float>;
extern template class TapeScope<double>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace tumornet::nn
