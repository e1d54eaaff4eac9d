// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/rsan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rcss {
namespace {

void check_iteration(const IterationResult& it, Eigen::Index frames,
                     Eigen::Index bins, int iteration) {
  const auto bad_shape = [&](const Mask& m) {
    return m.frames() != frames || m.bins() != bins;
  };
  if (bad_shape(it.speaker_mask) || bad_shape(it.noise_mask)) {
    std::ostringstream msg;
    msg << "estimator returned wrong mask shape at iteration " << iteration;
    throw ContractError(msg.str());
  }
  if (!(it.stop_flag >= 0.0 && it.stop_flag <= 1.0)) {
    std::ostringstream msg;
    msg << "estimator stop flag " << it.stop_flag << " outside [0,1]"
        << " at iteration " << iteration;
    throw ContractError(msg.str());
  }
}

// Shared recursion loop. accept decides, per iteration index and flag,
// whether the iteration's masks are kept; the loop ends on the first
// rejection or after max_iters.
template <typename AcceptFn>
BlockResult run_recursion(const MagnitudeSpectrogram& mixture,
                          const ResidualMask& initial_residual,
                          MaskEstimator& estimator, int max_iters,
                          const SeparateOptions& options, AcceptFn accept) {
  const Eigen::Index frames = mixture.frames();
  const Eigen::Index bins = mixture.bins();
  if (initial_residual.frames() != frames || initial_residual.bins() != bins)
    throw std::invalid_argument(
        "separate_block: residual shape does not match mixture");

  BlockResult result;
  result.noise_mask = Mask::zeros(frames, bins);
  RealMatrix noise_sum = RealMatrix::Zero(frames, bins);

  ResidualMask residual = initial_residual;
  if (options.keep_residual_trace) result.residual_trace.push_back(residual);

  for (int i = 0; i < max_iters; ++i) {
    IterationResult it = estimator.estimate(mixture, residual);
    check_iteration(it, frames, bins, i);
    if (!accept(i, it.stop_flag)) break;

    noise_sum += it.noise_mask.data;
    result.flags.push_back(it.stop_flag);
    residual = update_residual(residual, it, options.subtraction);
    result.speaker_masks.push_back(std::move(it.speaker_mask));
    if (options.keep_residual_trace) result.residual_trace.push_back(residual);
  }

  result.noise_mask = Mask::clamped(std::move(noise_sum));
  return result;
}

}  // namespace

double StopPolicy::threshold_for(int iteration) const {
  const size_t i = std::min(size_t(std::max(iteration, 0)),
                            thresholds.size() - 1);
  return thresholds[i];
}

void StopPolicy::validate() const {
  if (thresholds.empty())
    throw ConfigError("stop policy: thresholds must be non-empty");
  for (double t : thresholds)
    if (!(t > 0.0 && t < 1.0))
      throw ConfigError("stop policy: thresholds must lie in (0,1)");
  if (max_iterations < 1)
    throw ConfigError("stop policy: max_iterations must be >= 1");
}

ResidualMask update_residual(const ResidualMask& residual,
                             const IterationResult& iteration,
                             SubtractionPolicy policy) {
  if (!residual.same_shape(iteration.speaker_mask) ||
      !residual.same_shape(iteration.noise_mask))
    throw std::invalid_argument("update_residual: shape mismatch");
  RealMatrix next = residual.data - iteration.speaker_mask.data;
  if (policy == SubtractionPolicy::kSpeakerAndNoise)
    next -= iteration.noise_mask.data;
  return Mask::clamped(std::move(next));
}

BlockResult separate_block(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& initial_residual,
                           MaskEstimator& estimator, const StopPolicy& stop,
                           const SeparateOptions& options) {
  stop.validate();
  return run_recursion(mixture, initial_residual, estimator,
                       stop.max_iterations, options,
                       [&stop](int i, double flag) {
                         return !(flag > stop.threshold_for(i));
                       });
}

BlockResult separate_block_fixed(const MagnitudeSpectrogram& mixture,
                                 const ResidualMask& initial_residual,
                                 MaskEstimator& estimator, int num_iterations,
                                 const SeparateOptions& options) {
  if (num_iterations < 1)
    throw std::invalid_argument("separate_block_fixed: need >= 1 iteration");
  return run_recursion(mixture, initial_residual, estimator, num_iterations,
                       options, [](int, double) { return true; });
}

}  // namespace rcss
