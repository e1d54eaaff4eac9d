// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace rcss {

// Time-frequency matrices are stored time-major: rows = frames, cols = bins.
using RealMatrix = Eigen::ArrayXXd;
using ComplexMatrix = Eigen::ArrayXXcd;

// An estimator plugin or caller broke an interface contract
// (mask range, flag range, shape mismatch against the block).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration or unusable input artifacts.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Tolerance for float excursions when validating mask entries. Values inside
// [-kMaskRangeTol, 1 + kMaskRangeTol] are snapped back into [0, 1]; anything
// further out is a contract violation.
inline constexpr double kMaskRangeTol = 1e-9;

// T x F mask with every entry in [0, 1].
struct Mask {
  RealMatrix data;

  Mask() = default;
  // Validating constructor; throws ContractError on out-of-range entries.
  explicit Mask(RealMatrix values);

  // Clamps arbitrary values into [0, 1].
  static Mask clamped(RealMatrix values);
  static Mask zeros(Eigen::Index frames, Eigen::Index bins);
  static Mask ones(Eigen::Index frames, Eigen::Index bins);

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index bins() const { return data.cols(); }
  bool same_shape(const Mask& other) const {
    return frames() == other.frames() && bins() == other.bins();
  }
};

// A residual mask is a mask that tracks not-yet-attributed T-F regions; it
// shares the representation and the [0, 1] invariant.
using ResidualMask = Mask;

}  // namespace rcss
