// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcss/css.hpp"
#include "rcss/estimator.hpp"
#include "rcss/spectral.hpp"

namespace rcss {

// Recipe for one synthetic session. Everything the generator does derives
// deterministically from these fields.
struct SessionSpec {
  std::string name = "session";
  std::uint64_t seed = 1;
  int sample_rate = 16000;
  double duration_s = 60.0;
  int num_speakers = 2;
  double overlap_ratio = 0.3;      // overlapped time / union speech time
  double utterance_min_s = 1.5;
  double utterance_max_s = 2.5;
  double gain_min_db = -5.0;
  double gain_max_db = 5.0;
  double snr_min_db = 0.0;
  double snr_max_db = 10.0;
  double silence_min_s = 0.1;      // gap range used when not overlapping
  double silence_max_s = 0.5;
  int hot_spot_count = 0;          // clusters of 3 simultaneous speakers

  void validate() const;  // throws ConfigError
};

struct Interval {
  Eigen::Index begin = 0;  // samples, half-open
  Eigen::Index end = 0;
};

// Generated session with exact ground truth. The mixture equals the sum of
// the references plus the noise, sample for sample.
struct SessionTruth {
  int sample_rate = 16000;
  std::vector<double> mixture;
  std::vector<std::vector<double>> refs;        // per speaker, zero when idle
  std::vector<double> noise;
  std::vector<std::vector<Interval>> activity;  // per speaker
  double realized_overlap = 0.0;
  std::vector<Interval> hot_spots;
};

// Deterministic speech stand-in: a harmonic complex with a speaker-specific
// fundamental, slow pitch drift, 2-8 Hz amplitude modulation and a -30 dB
// noise floor, normalized to unit RMS.
std::vector<double> gen_source(std::uint64_t seed, double duration_s,
                               int speaker_id, int sample_rate = 16000);

// Lays utterances on a timeline, steering pairwise overlaps to hit the
// requested overlap ratio, then adds pink noise at the drawn SNR. Throws
// ConfigError when the requested overlap is not achievable, naming the
// achievable bound.
SessionTruth mix_session(const SessionSpec& spec);

// Ratio of (time with >= 2 active speakers) to (time with >= 1), from the
// activity intervals.
double measure_overlap(const SessionTruth& truth);

// Session-level spectra shared by oracle plumbing and evaluation.
struct SessionSpectra {
  ComplexSpectrogram mixture;
  MagnitudeSpectrogram mixture_mag;
  std::vector<MagnitudeSpectrogram> ref_mags;
  MagnitudeSpectrogram noise_mag;
};

SessionSpectra analyze_session(const SessionTruth& truth,
                               const StftConfig& cfg);

// Ground-truth context for one block: per-source block-aligned magnitudes,
// with sources below the activity threshold left out.
OracleContext truth_block_context(const SessionSpectra& spectra,
                                  const BlockRange& block,
                                  const WindowConfig& window,
                                  double activity_threshold);

// Closure over the session spectra for the pipeline.
ContextProvider make_truth_context_provider(const SessionSpectra& spectra,
                                            const WindowConfig& window,
                                            double activity_threshold);

// Per-block true active-source counts, by the same activity rule the
// context uses.
std::vector<int> truth_block_counts(const SessionSpectra& spectra,
                                    const std::vector<BlockRange>& blocks,
                                    const WindowConfig& window,
                                    double activity_threshold);

}  // namespace rcss
