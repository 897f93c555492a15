#include "tumornet/field/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace tumornet::field {

template <typename Scalar>
std::array<double, 3> center_of_mass(const Volume3<Scalar>& v) {
  double total = 0.0;
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (int z = 0; z < v.nz(); ++z) {
    for (int y = 0; y < v.ny(); ++y) {
      for (int x = 0; x < v.nx(); ++x) {
        const double w = static_cast<double>(v(x, y, z));
        total += w;
        sx += w * x;
        sy += w * y;
        sz += w * z;
      }
    }
  }
  if (!(total > 0.0)) throw Error(ErrorCode::empty_mass, "empty mass: volume sums to zero");
  return {sx / total, sy / total, sz / total};
}

template <typename Scalar>
Volume3<Scalar> translate(const Volume3<Scalar>& v, const Index3& shift, Scalar fill) {
  Volume3<Scalar> out(v.dims(), fill, v.spacing());
  const auto& d = v.dims();
  const int x0 = std::max(0, shift[0]), x1 = std::min(d[0], d[0] + shift[0]);
  const int y0 = std::max(0, shift[1]), y1 = std::min(d[1], d[1] + shift[1]);
  const int z0 = std::max(0, shift[2]), z1 = std::min(d[2], d[2] + shift[2]);
  for (int z = z0; z < z1; ++z) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) out(x, y, z) = v(x - shift[0], y - shift[1], z - shift[2]);
    }
  }
  return out;
}

Index3 crop_offset(const Dims& source, const Dims& target) {
  Index3 off{};
  for (int a = 0; a < 3; ++a) {
    if (target[a] > source[a] || target[a] <= 0) {
      throw Error(ErrorCode::invalid_argument,
                  "crop target " + to_string(target) + " does not fit inside " + to_string(source));
    }
    off[a] = (source[a] - target[a] + 1) / 2;
  }
  return off;
}

template <typename Scalar>
Volume3<Scalar> crop_center(const Volume3<Scalar>& v, const Dims& target) {
  const Index3 off = crop_offset(v.dims(), target);
  Volume3<Scalar> out(target, Scalar(0), v.spacing());
  for (int z = 0; z < target[2]; ++z) {
    for (int y = 0; y < target[1]; ++y) {
      for (int x = 0; x < target[0]; ++x) out(x, y, z) = v(x + off[0], y + off[1], z + off[2]);
    }
  }
  return out;
}

template <typename Scalar>
Volume3<Scalar> pad_into(const Volume3<Scalar>& v, const Dims& target, const Index3& offset, Scalar fill) {
  Volume3<Scalar> out(target, fill, v.spacing());
  for (int z = 0; z < v.nz(); ++z) {
    for (int y = 0; y < v.ny(); ++y) {
      for (int x = 0; x < v.nx(); ++x) {
        const int tx = x + offset[0], ty = y + offset[1], tz = z + offset[2];
        if (out.contains(tx, ty, tz)) out(tx, ty, tz) = v(x, y, z);
      }
    }
  }
  return out;
}

namespace {

struct AxisSample {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> w;
};

AxisSample axis_samples(int n_in, int n_out) {
  AxisSample s;
  s.lo.resize(n_out);
  s.hi.resize(n_out);
  s.w.resize(n_out);
  for (int i = 0; i < n_out; ++i) {
    const double u = n_out > 1 ? static_cast<double>(i) * (n_in - 1) / (n_out - 1) : 0.0;
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::clamp(i0, 0, n_in - 1);
    s.lo[i] = i0;
    s.hi[i] = std::min(i0 + 1, n_in - 1);
    s.w[i] = u - i0;
  }
  return s;
}

void check_resize_target(const Dims& target) {
  if (target[0] < 2 || target[1] < 2 || target[2] < 2) {
    throw Error(ErrorCode::invalid_argument, "resize target must be at least 2 per axis, got " + to_string(target));
  }
}

double rescaled_spacing(double h, int n_in, int n_out) {
  return n_out > 1 && n_in > 1 ? h * (n_in - 1) / (n_out - 1) : h;
}

}  // namespace

template <typename Scalar>
Volume3<Scalar> resize_trilinear(const Volume3<Scalar>& v, const Dims& target) {
  check_resize_target(target);
  if (target == v.dims()) return v;
  const AxisSample sx = axis_samples(v.nx(), target[0]);
  const AxisSample sy = axis_samples(v.ny(), target[1]);
  const AxisSample sz = axis_samples(v.nz(), target[2]);
  Volume3<Scalar> out(target, Scalar(0), rescaled_spacing(v.spacing(), v.nx(), target[0]));
  for (int z = 0; z < target[2]; ++z) {
    const double wz = sz.w[z];
    for (int y = 0; y < target[1]; ++y) {
      const double wy = sy.w[y];
      for (int x = 0; x < target[0]; ++x) {
        const double wx = sx.w[x];
        auto at = [&](int ix, int iy, int iz) { return static_cast<double>(v(ix, iy, iz)); };
        const double c00 = at(sx.lo[x], sy.lo[y], sz.lo[z]) * (1 - wx) + at(sx.hi[x], sy.lo[y], sz.lo[z]) * wx;
        const double c10 = at(sx.lo[x], sy.hi[y], sz.lo[z]) * (1 - wx) + at(sx.hi[x], sy.hi[y], sz.lo[z]) * wx;
        const double c01 = at(sx.lo[x], sy.lo[y], sz.hi[z]) * (1 - wx) + at(sx.hi[x], sy.lo[y], sz.hi[z]) * wx;
        const double c11 = at(sx.lo[x], sy.hi[y], sz.hi[z]) * (1 - wx) + at(sx.hi[x], sy.hi[y], sz.hi[z]) * wx;
        const double c0 = c00 * (1 - wy) + c10 * wy;
        const double c1 = c01 * (1 - wy) + c11 * wy;
        out(x, y, z) = static_cast<Scalar>(c0 * (1 - wz) + c1 * wz);
      }
    }
  }
  return out;
}

template <typename Scalar>
Volume3<Scalar> resize_nearest(const Volume3<Scalar>& v, const Dims& target) {
  check_resize_target(target);
  if (target == v.dims()) return v;
  std::array<std::vector<int>, 3> idx;
  for (int a = 0; a < 3; ++a) {
    idx[a].resize(target[a]);
    for (int i = 0; i < target[a]; ++i) {
      const double u = static_cast<double>(i) * (v.dims()[a] - 1) / (target[a] - 1);
      idx[a][i] = std::clamp(static_cast<int>(std::lround(u)), 0, v.dims()[a] - 1);
    }
  }
  Volume3<Scalar> out(target, Scalar(0), rescaled_spacing(v.spacing(), v.nx(), target[0]));
  for (int z = 0; z < target[2]; ++z) {
    for (int y = 0; y < target[1]; ++y) {
      for (int x = 0; x < target[0]; ++x) out(x, y, z) = v(idx[0][x], idx[1][y], idx[2][z]);
    }
  }
  return out;
}

namespace {

constexpr std::array<std::array<int, 3>, 6> kPerms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

}  // namespace

AxisTransform AxisTransform::mirror(int axis) {
  AxisTransform t;
  t.flip[axis] = true;
  return t;
}

AxisTransform AxisTransform::rot90(int axis) {
  const int b = (axis + 1) % 3, c = (axis + 2) % 3;
  AxisTransform t;
  t.perm[b] = c;
  t.flip[b] = true;
  t.perm[c] = b;
  return t;
}

AxisTransform AxisTransform::from_index(int index) {
  if (index < 0 || index >= 48) throw Error(ErrorCode::invalid_argument, "axis transform index must be in [0,48)");
  AxisTransform t;
  t.perm = kPerms[index / 8];
  for (int a = 0; a < 3; ++a) t.flip[a] = ((index % 8) >> a) & 1;
  return t;
}

std::vector<AxisTransform> AxisTransform::all() {
  std::vector<AxisTransform> out;
  for (int i = 0; i < 48; ++i) out.push_back(from_index(i));
  return out;
}

int AxisTransform::to_index() const {
  const int p = static_cast<int>(std::find(kPerms.begin(), kPerms.end(), perm) - kPerms.begin());
  return p * 8 + (flip[0] ? 1 : 0) + (flip[1] ? 2 : 0) + (flip[2] ? 4 : 0);
}

AxisTransform AxisTransform::inverse() const {
  AxisTransform inv;
  for (int i = 0; i < 3; ++i) {
    inv.perm[perm[i]] = i;
    inv.flip[perm[i]] = flip[i];
  }
  return inv;
}

AxisTransform AxisTransform::then(const AxisTransform& next) const {
  AxisTransform out;
  for (int i = 0; i < 3; ++i) {
    out.perm[i] = perm[next.perm[i]];
    out.flip[i] = next.flip[i] != flip[next.perm[i]];
  }
  return out;
}

std::array<double, 3> AxisTransform::apply_normalized(const std::array<double, 3>& s) const {
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = flip[i] ? 1.0 - s[perm[i]] : s[perm[i]];
  return out;
}

std::string AxisTransform::name() const {
  static constexpr const char* kAxis = "xyz";
  std::string s;
  for (int i = 0; i < 3; ++i) {
    if (flip[i]) s += '-';
    s += kAxis[perm[i]];
  }
  return s;
}

template <typename Scalar>
Volume3<Scalar> orient(const Volume3<Scalar>& v, const AxisTransform& t) {
  if (t.mixes_axes() && !v.is_cubic()) {
    throw Error(ErrorCode::invalid_argument,
                "axis-mixing transform " + t.name() + " requires a cubic volume, got " + to_string(v.dims()));
  }
  const auto& in = v.dims();
  const std::array<std::int64_t, 3> stride{1, in[0], static_cast<std::int64_t>(in[0]) * in[1]};
  Dims od{};
  std::array<std::int64_t, 3> start{}, step{};
  for (int i = 0; i < 3; ++i) {
    const int a = t.perm[i];
    od[i] = in[a];
    start[i] = t.flip[i] ? (in[a] - 1) * stride[a] : 0;
    step[i] = t.flip[i] ? -stride[a] : stride[a];
  }
  Volume3<Scalar> out(od, Scalar(0), v.spacing());
  std::int64_t o = 0;
  for (int z = 0; z < od[2]; ++z) {
    const std::int64_t bz = start[2] + z * step[2];
    for (int y = 0; y < od[1]; ++y) {
      const std::int64_t by = bz + start[1] + y * step[1];
      for (int x = 0; x < od[0]; ++x) out[o++] = v[by + start[0] + x * step[0]];
    }
  }
  return out;
}

#define TUMORNET_INSTANTIATE_TRANSFORMS(S)                                                  \
  template std::array<double, 3> center_of_mass(const Volume3<S>&);                        \
  template Volume3<S> translate(const Volume3<S>&, const Index3&, S);                      \
  template Volume3<S> crop_center(const Volume3<S>&, const Dims&);                         \
  template Volume3<S> pad_into(const Volume3<S>&, const Dims&, const Index3&, S);          \
  template Volume3<S> resize_trilinear(const Volume3<S>&, const Dims&);                    \
  template Volume3<S> resize_nearest(const Volume3<S>&, const Dims&);                      \
  template Volume3<S> orient(const Volume3<S>&, const AxisTransform&);

TUMORNET_INSTANTIATE_TRANSFORMS(float)
TUMORNET_INSTANTIATE_TRANSFORMS(double)

#undef TUMORNET_INSTANTIATE_TRANSFORMS

}  // namespace tumornet::field
