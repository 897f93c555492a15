#pragma once

#include <string>
#include <vector>

#include "tumornet/dataset/manifest.hpp"
#include "tumornet/field/transforms.hpp"
#include "tumornet/nn/tensor.hpp"

namespace tumornet::models {

// One preprocessed sample held in memory: tissue channels (wm, gm, csf) and
// target, each n^3 with x fastest, plus its model-frame theta.
struct MemorySample {
  std::string id;
  int n = 0;
  std::vector<float> tissue;  // 3 n^3
  std::vector<float> target;  // n^3
  field::NormalizedParams theta{};
};

struct MemorySplit {
  field::ParamRanges ranges;
  std::vector<MemorySample> samples;
  std::size_t size() const { return samples.size(); }
};

// Loads the first `limit` samples of a split (all when limit == 0).
MemorySplit load_split(const dataset::Manifest& m, dataset::Split split, std::size_t limit = 0);

// Applies a cube symmetry to volumes and seed coordinates; rho and d_w are
// untouched. Seed components are mapped through `ranges` to grid coordinates
// and back.
MemorySample transform_sample(const MemorySample& s, const field::AxisTransform& t, const field::ParamRanges& ranges);

struct Batch {
  nn::TensorF tissue;  // (B, 3, n, n, n)
  nn::TensorF theta;   // (B, 5)
  nn::TensorF target;  // (B, 1, n, n, n)
};

Batch make_batch(const std::vector<const MemorySample*>& samples);

// Region mask for masked_mse: voxels with target > threshold, dilated by
// `radius` voxels (cube neighbourhood, clipped at the border).
nn::TensorF region_mask(const nn::TensorF& target, float threshold, int radius);

}  // namespace tumornet::models
