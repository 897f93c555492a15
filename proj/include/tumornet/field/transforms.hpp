#pragma once

#include <array>
#include <string>
#include <vector>

#include "tumornet/field/volume.hpp"

namespace tumornet::field {

// Intensity-weighted mean voxel coordinate. Throws ErrorCode::empty_mass when
// the volume sums to zero.
template <typename Scalar>
std::array<double, 3> center_of_mass(const Volume3<Scalar>& v);

// out[p] = v[p - shift] where p - shift is inside the grid, `fill` elsewhere.
template <typename Scalar>
Volume3<Scalar> translate(const Volume3<Scalar>& v, const Index3& shift, Scalar fill = Scalar(0));

// Offset of the centered window of size `target` inside `source`. When the
// margin is odd, the lower side gets the larger half.
Index3 crop_offset(const Dims& source, const Dims& target);

template <typename Scalar>
Volume3<Scalar> crop_center(const Volume3<Scalar>& v, const Dims& target);

// Inverse of crop_center: embeds `v` at `offset` inside a `fill`ed volume.
template <typename Scalar>
Volume3<Scalar> pad_into(const Volume3<Scalar>& v, const Dims& target, const Index3& offset, Scalar fill = Scalar(0));

// Corner-aligned trilinear resampling: output voxel i maps to input coordinate
// i * (n_in - 1) / (n_out - 1). Spacing is rescaled accordingly.
template <typename Scalar>
Volume3<Scalar> resize_trilinear(const Volume3<Scalar>& v, const Dims& target);

// Corner-aligned nearest-neighbour resampling, for label-like channels.
template <typename Scalar>
Volume3<Scalar> resize_nearest(const Volume3<Scalar>& v, const Dims& target);

// One of the 48 axis-aligned symmetries of the cube. Output axis i reads input
// axis perm[i], reversed when flip[i] is set:
//   out(x')  with  x'_i = flip[i] ? n - 1 - x_{perm[i]} : x_{perm[i]}.
struct AxisTransform {
  std::array<int, 3> perm{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  static AxisTransform identity() { return {}; }
  static AxisTransform mirror(int axis);
  // Quarter turn about `axis`, mapping the next axis onto the one after it.
  static AxisTransform rot90(int axis);
  // Enumerates all 48 symmetries; index 0 is the identity.
  static AxisTransform from_index(int index);
  static std::vector<AxisTransform> all();

  int to_index() const;
  bool mixes_axes() const { return perm != std::array<int, 3>{0, 1, 2}; }
  AxisTransform inverse() const;
  // (a.then(b)) applies a first, then b.
  AxisTransform then(const AxisTransform& next) const;

  // Same symmetry acting on normalized coordinates in [0,1]^3.
  std::array<double, 3> apply_normalized(const std::array<double, 3>& s) const;

  std::string name() const;
  bool operator==(const AxisTransform&) const = default;
};

template <typename Scalar>
Volume3<Scalar> orient(const Volume3<Scalar>& v, const AxisTransform& t);

}  // namespace tumornet::field
