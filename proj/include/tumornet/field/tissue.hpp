#pragma once

#include <array>
#include <string>

#include "tumornet/field/volume.hpp"

namespace tumornet::field {

// Per-voxel white matter / gray matter / cerebrospinal fluid fractions.
// Whatever is left over (1 - wm - gm - csf) is background.
struct TissueMap {
  Volume3f wm;
  Volume3f gm;
  Volume3f csf;

  const Dims& dims() const { return wm.dims(); }

  static inline const std::array<std::string, 3> channel_names{"wm", "gm", "csf"};

  const Volume3f& channel(int i) const { return i == 0 ? wm : (i == 1 ? gm : csf); }
  Volume3f& channel(int i) { return i == 0 ? wm : (i == 1 ? gm : csf); }

  // Throws if the channels disagree in shape or violate the fraction bounds.
  void validate(double tol = 1e-6) const {
    if (!wm.same_shape(gm) || !wm.same_shape(csf) || wm.spacing() != gm.spacing() || wm.spacing() != csf.spacing()) {
      throw Error(ErrorCode::shape_mismatch, "tissue channels must share dims and spacing");
    }
    const auto total = wm.array() + gm.array() + csf.array();
    for (int c = 0; c < 3; ++c) {
      const auto& a = channel(c).array();
      if (!a.isFinite().all() || (a < -tol).any() || (a > 1 + tol).any()) {
        throw Error(ErrorCode::invalid_argument, "tissue channel " + channel_names[c] + " outside [0,1]");
      }
    }
    if ((total > 1.0 + tol).any()) {
      throw Error(ErrorCode::invalid_argument, "tissue fractions sum above 1");
    }
  }

  bool operator==(const TissueMap& o) const { return wm == o.wm && gm == o.gm && csf == o.csf; }
};

}  // namespace tumornet::field
