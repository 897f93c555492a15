#include "tumornet/nn/tensor.hpp"

namespace tumornet::nn {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw Error(ErrorCode::shape_mismatch, "negative extent in shape " + shape_string(s));
    n *= d;
  }
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<TensorNode<T>>()) {
  node_->value = Array::Constant(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, Array values) : node_(std::make_shared<TensorNode<T>>()) {
  if (values.size() != shape_numel(shape)) {
    throw Error(ErrorCode::shape_mismatch, "tensor of shape " + shape_string(shape) + " given " +
                                               std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::initializer_list<T> values) {
  Array a(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (T v : values) a[i++] = v;
  return Tensor(std::move(shape), std::move(a));
}

template <typename T>
int Tensor<T>::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw Error(ErrorCode::invalid_argument, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  }
  return node_->shape[a];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw Error(ErrorCode::shape_mismatch, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

namespace {
template <typename T>
Tape<T>*& active_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_tape<T>();
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error(ErrorCode::invalid_argument,
                "backward needs a scalar loss, got shape " + (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  auto& node = *loss.node();
  node.grad = TensorNode<T>::Array::Ones(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  records_.clear();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(active_tape<T>()) {
  active_tape<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  active_tape<T>() = previous_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;

}  // namespace tumornet::nn
