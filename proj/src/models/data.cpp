#include "tumornet/models/data.hpp"

#include <algorithm>
#include <cstring>

#include "tumornet/models/config.hpp"

namespace tumornet::models {

MemorySplit load_split(const dataset::Manifest& m, dataset::Split split, std::size_t limit) {
  MemorySplit out;
  out.ranges = m.ranges;
  auto records = m.split(split);
  if (limit > 0 && records.size() > limit) records.resize(limit);
  out.samples.reserve(records.size());
  for (const auto* r : records) {
    const auto loaded = dataset::load_sample(m, *r);
    const auto& d = loaded.target.dims();
    if (d[0] != d[1] || d[1] != d[2] || loaded.tissue.dims() != d) {
      throw Error(ErrorCode::shape_mismatch, "sample " + r->id + ": expected cubic tissue and target of equal dims");
    }
    MemorySample s;
    s.id = r->id;
    s.n = d[0];
    const auto nv = static_cast<std::size_t>(loaded.target.size());
    s.tissue.resize(3 * nv);
    for (int c = 0; c < 3; ++c) {
      std::memcpy(s.tissue.data() + c * nv, loaded.tissue.channel(c).data(), nv * sizeof(float));
    }
    s.target.assign(loaded.target.data(), loaded.target.data() + nv);
    s.theta = r->theta_norm;
    out.samples.push_back(std::move(s));
  }
  return out;
}

MemorySample transform_sample(const MemorySample& s, const field::AxisTransform& t, const field::ParamRanges& ranges) {
  const field::Dims d{s.n, s.n, s.n};
  const auto nv = static_cast<std::size_t>(field::voxel_count(d));
  auto orient_block = [&](const float* src, float* dst) {
    field::Volume3f v(d, Eigen::Map<const field::Volume3f::Array>(src, static_cast<Eigen::Index>(nv)));
    const auto o = field::orient(v, t);
    std::memcpy(dst, o.data(), nv * sizeof(float));
  };
  MemorySample out = s;
  for (int c = 0; c < 3; ++c) orient_block(s.tissue.data() + c * nv, out.tissue.data() + c * nv);
  orient_block(s.target.data(), out.target.data());

  const auto r = ranges.as_array();
  std::array<double, 3> seed{};
  for (int i = 0; i < 3; ++i) seed[i] = r[2 + i].lo + s.theta[2 + i] * (r[2 + i].hi - r[2 + i].lo);
  const auto moved = t.apply_normalized(seed);
  for (int i = 0; i < 3; ++i) {
    const double span = r[2 + i].hi - r[2 + i].lo;
    out.theta[2 + i] = span > 0 ? std::clamp((moved[i] - r[2 + i].lo) / span, 0.0, 1.0) : 0.5;
  }
  return out;
}

Batch make_batch(const std::vector<const MemorySample*>& samples) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "make_batch: empty batch");
  const int B = static_cast<int>(samples.size()), n = samples.front()->n;
  const std::int64_t nv = static_cast<std::int64_t>(n) * n * n;
  Batch b{nn::TensorF(nn::Shape{B, kTissueChannels, n, n, n}), nn::TensorF(nn::Shape{B, kParamCount}),
          nn::TensorF(nn::Shape{B, 1, n, n, n})};
  for (int i = 0; i < B; ++i) {
    const auto& s = *samples[i];
    if (s.n != n) throw Error(ErrorCode::shape_mismatch, "make_batch: mixed sample sizes");
    std::copy(s.tissue.begin(), s.tissue.end(), b.tissue.data() + i * 3 * nv);
    std::copy(s.target.begin(), s.target.end(), b.target.data() + i * nv);
    for (int k = 0; k < kParamCount; ++k) b.theta.data()[i * kParamCount + k] = static_cast<float>(s.theta[k]);
  }
  return b;
}

nn::TensorF region_mask(const nn::TensorF& target, float threshold, int radius) {
  if (target.rank() != 5) throw Error(ErrorCode::shape_mismatch, "region_mask expects rank 5");
  const int n0 = target.dim(2), n1 = target.dim(3), n2 = target.dim(4);
  const std::int64_t plane = static_cast<std::int64_t>(n0) * n1 * n2;
  const std::int64_t planes = static_cast<std::int64_t>(target.dim(0)) * target.dim(1);
  nn::TensorF mask(target.shape());
  // Separable max filter: a cube dilation is three 1-D dilations.
  std::vector<float> a(static_cast<std::size_t>(plane)), b(a.size());
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* t = target.data() + p * plane;
    for (std::int64_t i = 0; i < plane; ++i) a[i] = t[i] > threshold ? 1.0f : 0.0f;
    const int ext[3] = {n0, n1, n2};
    const std::int64_t stride[3] = {static_cast<std::int64_t>(n1) * n2, n2, 1};
    for (int axis = 0; axis < 3; ++axis) {
      for (std::int64_t i = 0; i < plane; ++i) {
        const int c = static_cast<int>((i / stride[axis]) % ext[axis]);
        float v = 0.0f;
        for (int o = std::max(0, c - radius); o <= std::min(ext[axis] - 1, c + radius) && v == 0.0f; ++o) {
          v = a[i + (o - c) * stride[axis]];
        }
        b[i] = v;
      }
      std::swap(a, b);
    }
    std::copy(a.begin(), a.end(), mask.data() + p * plane);
  }
  return mask;
}

}  // namespace tumornet::models
