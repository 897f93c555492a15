#include "tumornet/dataset/preprocess.hpp"

#include <cmath>

namespace tumornet::dataset {

using field::Volume3f;

void to_json(nlohmann::json& j, const Provenance& p) {
  j = nlohmann::json{{"source_dims", p.source_dims},
                     {"shift", p.shift},
                     {"crop_dims", p.crop_dims},
                     {"crop_offset", p.crop_offset},
                     {"out_dims", p.out_dims}};
}

void from_json(const nlohmann::json& j, Provenance& p) {
  j.at("source_dims").get_to(p.source_dims);
  j.at("shift").get_to(p.shift);
  j.at("crop_dims").get_to(p.crop_dims);
  j.at("crop_offset").get_to(p.crop_offset);
  j.at("out_dims").get_to(p.out_dims);
}

Preprocessed preprocess(const field::TissueMap& tissue, const Volume3f& tumor, const field::Dims& work_dims,
                        const field::Dims& out_dims) {
  if (tissue.dims() != tumor.dims()) throw Error(ErrorCode::shape_mismatch, "tissue and tumor dims disagree");
  const auto com = field::center_of_mass(tumor);
  Provenance prov;
  prov.source_dims = tumor.dims();
  for (int a = 0; a < 3; ++a) {
    prov.shift[a] = tumor.dims()[a] / 2 - static_cast<int>(std::lround(com[a]));
  }
  prov.crop_dims = work_dims;
  prov.crop_offset = field::crop_offset(tumor.dims(), work_dims);
  prov.out_dims = out_dims;

  auto pipeline = [&](const Volume3f& v) {
    return field::resize_trilinear(field::crop_center(field::translate(v, prov.shift, 0.0f), work_dims), out_dims);
  };
  Preprocessed out;
  out.tumor = pipeline(tumor);
  for (int c = 0; c < 3; ++c) out.tissue.channel(c) = pipeline(tissue.channel(c));
  out.provenance = prov;
  return out;
}

Volume3f restore_frame(const Volume3f& v, const Provenance& p) {
  const Volume3f work = field::resize_trilinear(v, p.crop_dims);
  const Volume3f uncropped = field::pad_into(work, p.source_dims, p.crop_offset, 0.0f);
  return field::translate(uncropped, {-p.shift[0], -p.shift[1], -p.shift[2]}, 0.0f);
}

std::array<double, 3> seed_to_model_frame(const std::array<double, 3>& seed, const Provenance& p) {
  std::array<double, 3> out{};
  for (int a = 0; a < 3; ++a) {
    const double voxel = seed[a] * (p.source_dims[a] - 1);
    const double work = voxel + p.shift[a] - p.crop_offset[a];
    out[a] = p.crop_dims[a] > 1 ? work / (p.crop_dims[a] - 1) : 0.0;
  }
  return out;
}

Sample augment(const Sample& s, const field::AxisTransform& t) {
  Sample out;
  for (int c = 0; c < 3; ++c) out.tissue.channel(c) = field::orient(s.tissue.channel(c), t);
  out.tumor = field::orient(s.tumor, t);
  out.params = s.params;
  out.params.seed = t.apply_normalized(s.params.seed);
  return out;
}

}  // namespace tumornet::dataset
