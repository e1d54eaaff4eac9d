// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>
#include <vector>

#include "rcss/spectral.hpp"

namespace rcss {

// Ground-truth material for one block, row-aligned with the block's frames.
// Rows that fall outside the session (window padding) are zero. Sources whose
// in-block energy is below the activity threshold are already excluded.
struct OracleContext {
  std::vector<int> source_ids;           // active sources, ascending id
  std::vector<RealMatrix> source_mags;   // per active source, T_blk x F
  std::vector<Eigen::Index> onsets;      // first active row per source
  RealMatrix noise_mag;                  // T_blk x F

  Eigen::Index frames() const { return noise_mag.rows(); }
  Eigen::Index bins() const { return noise_mag.cols(); }
};

struct IterationResult {
  Mask speaker_mask;
  Mask noise_mask;
  double stop_flag = 0.0;  // in [0, 1]; likelihood that nothing is left
};

// One-source-at-a-time separator plugin. One call extracts one source.
//
// Contract: returned masks stay in [0, 1] (enforced by the Mask type), the
// flag stays in [0, 1] (enforced by the recursion engine), and results are
// deterministic given the inputs and the per-block state installed by
// reset_block. An instance must not be shared across concurrently processed
// blocks; the pipeline clones one per worker.
class MaskEstimator {
 public:
  virtual ~MaskEstimator() = default;

  // Called once per block before the recursion starts. Oracle estimators
  // take their aligned references from the context; trainable estimators
  // may ignore it.
  virtual void reset_block(const OracleContext& context) = 0;

  virtual IterationResult estimate(const MagnitudeSpectrogram& mixture,
                                   const ResidualMask& residual) = 0;

  virtual std::unique_ptr<MaskEstimator> clone() const = 0;
};

}  // namespace rcss
