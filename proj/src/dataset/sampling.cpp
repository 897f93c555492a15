#include "tumornet/dataset/sampling.hpp"

#include <queue>

#include "tumornet/core/rng.hpp"

namespace tumornet::dataset {

std::vector<std::int64_t> eligible_seed_voxels(const field::TissueMap& t) {
  const auto& d = t.dims();
  const std::int64_t n = t.wm.size();
  // Multi-source BFS over the 26-neighbourhood from every outside voxel.
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::queue<std::int64_t> q;
  for (std::int64_t i = 0; i < n; ++i) {
    if (static_cast<double>(t.wm[i]) + t.gm[i] + t.csf[i] < 0.5) {
      dist[i] = 0;
      q.push(i);
    }
  }
  while (!q.empty()) {
    const std::int64_t i = q.front();
    q.pop();
    if (dist[i] >= kSeedBoundaryMargin) continue;
    const auto c = t.wm.coords(i);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
          if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) continue;
          const std::int64_t j = t.wm.index(x, y, z);
          if (dist[j] < 0) {
            dist[j] = dist[i] + 1;
            q.push(j);
          }
        }
  }
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < n; ++i) {
    if (t.wm[i] > 0.5f && (dist[i] < 0 || dist[i] >= kSeedBoundaryMargin)) out.push_back(i);
  }
  return out;
}

field::GrowthParams sample_params(const field::ParamRanges& r, const field::TissueMap& t, std::uint64_t rng_seed) {
  if (!(r.rho.lo <= r.rho.hi) || !(r.d_w.lo <= r.d_w.hi) || !(r.d_w.lo > 0) || !(r.rho.lo > 0)) {
    throw Error(ErrorCode::invalid_argument, "sample_params: invalid rho/d_w ranges");
  }
  Rng rng(rng_seed);
  field::GrowthParams p;
  p.rho = uniform(rng, r.rho.lo, r.rho.hi);
  p.d_w = log_uniform(rng, r.d_w.lo, r.d_w.hi);
  const auto eligible = eligible_seed_voxels(t);
  if (eligible.empty()) throw Error(ErrorCode::no_eligible_seed, "no eligible seed voxel in tissue map");
  const auto c = t.wm.coords(eligible[uniform_index(rng, eligible.size())]);
  const auto& d = t.dims();
  for (int a = 0; a < 3; ++a) p.seed[a] = d[a] > 1 ? static_cast<double>(c[a]) / (d[a] - 1) : 0.0;
  return p;
}

}  // namespace tumornet::dataset
