// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "rcss/estimator.hpp"

namespace rcss {

// Per-iteration stop thresholds. The threshold for iteration i is
// thresholds[min(i, size - 1)], so {0.6, 0.1} means 0.6 for the first
// iteration and 0.1 from then on.
struct StopPolicy {
  std::vector<double> thresholds{0.6};
  int max_iterations = 4;

  double threshold_for(int iteration) const;
  void validate() const;  // throws ConfigError
};

enum class SubtractionPolicy {
  kSpeakerAndNoise,  // residual loses both estimated masks (default)
  kSpeakerOnly,
};

struct SeparateOptions {
  SubtractionPolicy subtraction = SubtractionPolicy::kSpeakerAndNoise;
  bool keep_residual_trace = false;
};

struct BlockResult {
  std::vector<Mask> speaker_masks;  // one per accepted iteration
  Mask noise_mask;                  // clamped sum over accepted iterations
  std::vector<double> flags;        // flags of the accepted iterations
  // Initial residual plus the residual after each accepted iteration;
  // empty unless SeparateOptions::keep_residual_trace is set.
  std::vector<ResidualMask> residual_trace;

  int iterations() const { return int(speaker_masks.size()); }
};

// R' = clamp(R - speaker_mask [- noise_mask], 0, 1); entrywise R' <= R.
ResidualMask update_residual(const ResidualMask& residual,
                             const IterationResult& iteration,
                             SubtractionPolicy policy);

// Runs the recursion until the estimator's stop flag exceeds the policy
// threshold for that iteration or max_iterations is reached. The iteration
// whose flag fires contributes no masks: the flag means everything is
// already separated. Ties (flag == threshold) continue the recursion.
BlockResult separate_block(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& initial_residual,
                           MaskEstimator& estimator, const StopPolicy& stop,
                           const SeparateOptions& options = {});

// Training-style recursion: exactly num_iterations are accepted regardless of
// the flags, which are still recorded for loss computation.
BlockResult separate_block_fixed(const MagnitudeSpectrogram& mixture,
                                 const ResidualMask& initial_residual,
                                 MaskEstimator& estimator, int num_iterations,
                                 const SeparateOptions& options = {});

}  // namespace rcss
