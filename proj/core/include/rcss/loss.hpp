// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "rcss/spectral.hpp"

namespace rcss {

// Flags are clamped into [kFlagEps, 1 - kFlagEps] before the logs.
inline constexpr double kFlagEps = 1e-7;
inline constexpr double kDefaultFlagWeight = 0.05;
// Exhaustive permutation search is factorial; refuse beyond this.
inline constexpr int kMaxPermutationSources = 6;

// Stop-flag targets for an S-source sample: (0, ..., 0, 1).
struct FlagTarget {
  std::vector<double> z;
  explicit FlagTarget(int num_sources);
};

struct LossBreakdown {
  double mse = 0.0;
  double flag = 0.0;
  double total = 0.0;                 // mse + alpha * flag
  std::vector<int> best_permutation;  // estimate index -> reference index
};

// Mask reconstruction error at a fixed permutation:
//   (1/(S*T*F)) * sum_i ||M_i (*) Y - A_perm(i)||^2
// + (1/(T*F))   *       ||M_N (*) Y - N||^2
// The speaker term is normalized by the source count as well; the noise term
// is not.
double mse_loss(const std::vector<Mask>& est_speakers, const Mask& est_noise,
                const MagnitudeSpectrogram& mixture,
                const std::vector<MagnitudeSpectrogram>& refs,
                const MagnitudeSpectrogram& noise_ref,
                const std::vector<int>& perm);

// Exhaustive argmin of the speaker term over all S! permutations. The noise
// term carries no permutation and is excluded from the search.
std::vector<int> best_permutation(const std::vector<Mask>& est_speakers,
                                  const MagnitudeSpectrogram& mixture,
                                  const std::vector<MagnitudeSpectrogram>& refs);

// Summed binary cross-entropy of the flags against (0, ..., 0, 1).
double flag_loss(const std::vector<double>& est_flags,
                 const FlagTarget& target);

LossBreakdown total_loss(const std::vector<Mask>& est_speakers,
                         const Mask& est_noise,
                         const std::vector<double>& est_flags,
                         const MagnitudeSpectrogram& mixture,
                         const std::vector<MagnitudeSpectrogram>& refs,
                         const MagnitudeSpectrogram& noise_ref,
                         double alpha = kDefaultFlagWeight);

// Fixed-channel baseline objective: exactly C estimated speaker masks are
// scored against the reference list zero-padded to C, minimizing the
// mse_loss-style objective over all C! permutations.
double upit_loss(const std::vector<Mask>& est_speakers, const Mask& est_noise,
                 const MagnitudeSpectrogram& mixture,
                 std::vector<MagnitudeSpectrogram> refs,
                 const MagnitudeSpectrogram& noise_ref);

// Analytic gradient of mse_loss with respect to every mask entry at a fixed
// permutation. Used to verify estimator training against finite differences.
struct MaskGradients {
  std::vector<RealMatrix> speakers;  // (2/(S*T*F)) * (M_i (*) Y - A) (*) Y
  RealMatrix noise;                  // (2/(T*F))   * (M_N (*) Y - N) (*) Y
};

MaskGradients mse_loss_grad_masks(const std::vector<Mask>& est_speakers,
                                  const Mask& est_noise,
                                  const MagnitudeSpectrogram& mixture,
                                  const std::vector<MagnitudeSpectrogram>& refs,
                                  const MagnitudeSpectrogram& noise_ref,
                                  const std::vector<int>& perm);

}  // namespace rcss
