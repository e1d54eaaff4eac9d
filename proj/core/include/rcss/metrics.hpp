// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rcss/css.hpp"
#include "rcss/simulator.hpp"

namespace rcss {

// Reporting caps: SI-SNR saturates at +/-60 dB, leakage at -80 dB.
inline constexpr double kSiSnrCapDb = 60.0;
inline constexpr double kLeakageFloorDb = -80.0;
// Samples ignored on both sides of a single-speaker region, absorbing
// synthesis spill-over from neighbouring frames.
inline constexpr Eigen::Index kLeakageGuard = 512;

// Scale-invariant SNR: project est onto ref, compare target energy with the
// residual. Throws std::invalid_argument on length mismatch or silent ref.
double si_snr(const std::vector<double>& est, const std::vector<double>& ref);

struct PitResult {
  double mean_db = 0.0;
  std::vector<int> assignment;     // ref index -> channel index (-1 = silent)
  std::vector<double> per_ref_db;  // NaN for excluded (silent) refs
};

// Best injective channel-to-reference assignment by mean SI-SNR. Silent
// references are excluded from the mean. Throws when there are more
// (non-silent) references than channels.
PitResult pit_si_snr(const std::vector<std::vector<double>>& channels,
                     const std::vector<std::vector<double>>& refs);

// Mean SI-SNR improvement of the best assignment over scoring the raw
// mixture against each reference.
double pit_si_snr_improvement(const std::vector<std::vector<double>>& channels,
                              const std::vector<std::vector<double>>& refs,
                              const std::vector<double>& mixture);

// Energy that leaks into channels whose speaker is quiet: pooled over all
// single-speaker regions (shrunk by `guard` samples on each side), the ratio
// of off-channel to on-channel energy in dB. Empty when the session has no
// usable single-speaker region.
std::optional<double> leakage_db(
    const std::vector<std::vector<double>>& channels,
    const std::vector<std::vector<Interval>>& activity,
    const std::vector<int>& speaker_to_channel,
    Eigen::Index guard = kLeakageGuard);

// Fraction of counting-capable blocks whose accepted-iteration count equals
// the true active-source count. Empty when no block carries a count (fixed-
// channel backends).
std::optional<double> counting_accuracy(
    const std::vector<BlockLogEntry>& blocks,
    const std::vector<int>& truth_counts);

// Number of times a speaker's dominant output channel changes between
// consecutive blocks in which that speaker is active. Zero means stitching
// kept every continuing speaker on one global channel.
int count_channel_switches(const std::vector<Mask>& global_masks,
                           const MagnitudeSpectrogram& mixture_mag,
                           const std::vector<MagnitudeSpectrogram>& ref_mags,
                           const std::vector<BlockRange>& blocks,
                           double activity_threshold);

struct SessionEval {
  std::string session;
  std::string condition;
  double si_snr_db = 0.0;
  double si_snri_db = 0.0;
  std::optional<double> leakage;
  std::optional<double> counting;
  int overflow = 0;
  double realized_overlap = 0.0;
};

struct EvalReport {
  std::vector<SessionEval> sessions;
};

// One CSV row per session plus a mean row; formatting is byte-stable for
// identical inputs.
std::string report_csv(const EvalReport& report);

// Fixed-precision decimal used everywhere numbers end up in reports.
std::string format_fixed(double value, int digits = 6);

}  // namespace rcss
