#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

#include "tumornet/core/error.hpp"

namespace tumornet::field {

using Dims = std::array<int, 3>;
using Index3 = std::array<int, 3>;

inline std::int64_t voxel_count(const Dims& d) {
  return static_cast<std::int64_t>(d[0]) * d[1] * d[2];
}

inline std::string to_string(const Dims& d);

// Dense scalar field on a regular grid, stored row-major with x fastest:
// linear index = x + nx * (y + ny * z).
template <typename Scalar>
class Volume3 {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Volume3() : dims_{0, 0, 0} {}

  explicit Volume3(const Dims& dims, Scalar fill = Scalar(0), double spacing = 1.0)
      : dims_(dims), spacing_(spacing) {
    check_dims(dims);
    data_ = Array::Constant(voxel_count(dims), fill);
  }

  Volume3(const Dims& dims, Array data, double spacing = 1.0)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims);
    if (data_.size() != voxel_count(dims)) {
      throw Error(ErrorCode::shape_mismatch,
                  "volume data length " + std::to_string(data_.size()) + " does not match dims " + to_string(dims));
    }
  }

  const Dims& dims() const { return dims_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  double spacing() const { return spacing_; }
  void set_spacing(double h) { spacing_ = h; }
  std::int64_t size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }
  bool is_cubic() const { return dims_[0] == dims_[1] && dims_[1] == dims_[2]; }

  std::int64_t index(int x, int y, int z) const {
    return x + static_cast<std::int64_t>(dims_[0]) * (y + static_cast<std::int64_t>(dims_[1]) * z);
  }
  Index3 coords(std::int64_t i) const {
    const int x = static_cast<int>(i % dims_[0]);
    const std::int64_t r = i / dims_[0];
    return {x, static_cast<int>(r % dims_[1]), static_cast<int>(r / dims_[1])};
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
  }

  Scalar& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  Scalar operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  Scalar& operator[](std::int64_t i) { return data_[i]; }
  Scalar operator[](std::int64_t i) const { return data_[i]; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  bool same_shape(const Volume3& o) const { return dims_ == o.dims_; }
  bool all_finite() const { return data_.isFinite().all(); }

  template <typename Other>
  Volume3<Other> cast() const {
    return Volume3<Other>(dims_, data_.template cast<Other>(), spacing_);
  }

  bool operator==(const Volume3& o) const {
    return dims_ == o.dims_ && spacing_ == o.spacing_ && (data_ == o.data_).all();
  }

 private:
  static void check_dims(const Dims& d) {
    if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0) {
      throw Error(ErrorCode::invalid_argument, "volume dims must be positive, got " + to_string(d));
    }
  }

  Dims dims_;
  double spacing_ = 1.0;
  Array data_;
};

using Volume3f = Volume3<float>;
using Volume3d = Volume3<double>;

inline std::string to_string(const Dims& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

}  // namespace tumornet::field
