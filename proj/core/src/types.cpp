// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/types.hpp"

#include <sstream>

namespace rcss {

Mask::Mask(RealMatrix values) {
  const double lo = values.size() ? values.minCoeff() : 0.0;
  const double hi = values.size() ? values.maxCoeff() : 0.0;
  if (lo < -kMaskRangeTol || hi > 1.0 + kMaskRangeTol ||
      !std::isfinite(lo) || !std::isfinite(hi)) {
    std::ostringstream msg;
    msg << "mask entries outside [0,1]: min=" << lo << " max=" << hi;
    throw ContractError(msg.str());
  }
  data = values.cwiseMax(0.0).cwiseMin(1.0);
}

Mask Mask::clamped(RealMatrix values) {
  Mask m;
  m.data = values.cwiseMax(0.0).cwiseMin(1.0);
  return m;
}

Mask Mask::zeros(Eigen::Index frames, Eigen::Index bins) {
  Mask m;
  m.data = RealMatrix::Zero(frames, bins);
  return m;
}

Mask Mask::ones(Eigen::Index frames, Eigen::Index bins) {
  Mask m;
  m.data = RealMatrix::Ones(frames, bins);
  return m;
}

}  // namespace rcss
