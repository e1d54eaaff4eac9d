// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "rcss/estimator.hpp"
#include "rcss/loss.hpp"

namespace rcss {

// A source counts as active in a block when its (residual-weighted) energy
// exceeds this fraction of the block's mixture energy.
inline constexpr double kDefaultActivityThreshold = 0.05;

// Ground-truth one-at-a-time estimator. Each call picks the not-yet-emitted
// source with the largest residual-weighted energy sum((R*A_s)^2), ties going
// to the lowest source index, and returns its ideal ratio mask
// A_s / (sum_s' A_s' + N). The full noise ratio mask N / (sum A + N) is
// attached to the first iteration of a block and a zero mask afterwards, so
// the per-block noise-mask sum equals the noise IRM exactly.
//
// The stop flag is 1.0 once no un-emitted source clears the activity
// threshold, 0.0 otherwise.
//
// leak > 0 turns this into a deliberately imperfect estimator: the returned
// speaker mask becomes (1-leak)*IRM_s + leak*sum of the other sources' IRMs,
// a stand-in for cross-channel leakage. leak must lie in [0, 0.5].
class OracleRsanEstimator : public MaskEstimator {
 public:
  explicit OracleRsanEstimator(
      double activity_threshold = kDefaultActivityThreshold,
      double leak = 0.0);

  void reset_block(const OracleContext& context) override;
  IterationResult estimate(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& residual) override;
  std::unique_ptr<MaskEstimator> clone() const override;

  // Context indices in emission order, cleared by reset_block.
  const std::vector<int>& emitted_ids() const { return emitted_ids_; }

 private:
  double activity_threshold_;
  double leak_;
  bool has_context_ = false;
  OracleContext context_;
  RealMatrix denom_;  // sum of source magnitudes + noise magnitude
  std::vector<char> emitted_;
  std::vector<int> emitted_ids_;
  int iteration_ = 0;
};

// Fixed-channel ground-truth baseline: emits all sources at once, no
// recursion, no counting. Sources beyond the channel budget are dropped
// (weakest first) and counted as overflow events.
struct UpitBlockOutput {
  std::vector<Mask> speaker_masks;  // exactly `channels`, onset order
  Mask noise_mask;
  int overflow = 0;                 // number of dropped active sources
  std::vector<int> dropped_ids;
};

class OracleUpitEstimator {
 public:
  explicit OracleUpitEstimator(
      int channels, double activity_threshold = kDefaultActivityThreshold);

  void reset_block(const OracleContext& context);
  UpitBlockOutput estimate_all(const MagnitudeSpectrogram& mixture);
  int channels() const { return channels_; }

 private:
  int channels_;
  double activity_threshold_;
  bool has_context_ = false;
  OracleContext context_;
};

// Tiny trainable estimator used to exercise the loss gradients end to end.
// Masks come from a per-frequency affine map of the mixture and residual
// magnitudes through a sigmoid; the stop flag is a sigmoid of an affine
// function of the mean squared residual.
struct ToyParams {
  Eigen::ArrayXd spk_w_mix, spk_w_res, spk_b;      // one weight per bin
  Eigen::ArrayXd noise_w_mix, noise_w_res, noise_b;
  double flag_w = 0.0;
  double flag_b = 0.0;

  static ToyParams zeros(Eigen::Index bins);
  ToyParams& operator+=(const ToyParams& other);
  ToyParams& operator*=(double scale);
  double max_abs() const;
};

class ToyEstimator : public MaskEstimator {
 public:
  // Small random initialization; deterministic for a given seed.
  ToyEstimator(Eigen::Index bins, std::uint64_t seed);
  explicit ToyEstimator(ToyParams params);

  void reset_block(const OracleContext&) override {}
  IterationResult estimate(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& residual) override;
  std::unique_ptr<MaskEstimator> clone() const override;

  const ToyParams& params() const { return params_; }
  ToyParams& params() { return params_; }

 private:
  ToyParams params_;
};

// One training sample: a mixture with its per-source and noise references.
struct ToySample {
  MagnitudeSpectrogram mixture;
  std::vector<MagnitudeSpectrogram> refs;
  MagnitudeSpectrogram noise;
};

// Mean combined objective (reconstruction + flag term) over the dataset,
// unrolling one recursion iteration per reference source.
double toy_total_loss(const ToyEstimator& estimator,
                      const std::vector<ToySample>& dataset,
                      double alpha = kDefaultFlagWeight);

// Analytic parameter gradient for one sample, chaining the mask gradients
// through the sigmoid/affine layers. The residual entering each iteration is
// treated as a constant, which is exact for single-source samples (the
// residual is then the untouched all-one matrix).
ToyParams toy_loss_gradient(const ToyEstimator& estimator,
                            const ToySample& sample,
                            double alpha = kDefaultFlagWeight);

// Full-batch gradient descent. Throws if the loss turns non-finite, naming
// the step. steps == 0 returns the initial estimator unchanged.
ToyEstimator toy_train(const ToyEstimator& init,
                       const std::vector<ToySample>& dataset, int steps,
                       double lr, double alpha = kDefaultFlagWeight);

}  // namespace rcss
