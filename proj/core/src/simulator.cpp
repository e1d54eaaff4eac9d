// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/simulator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rcss/log.hpp"
#include "rcss/random.hpp"

namespace rcss {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
// Max pairwise overlap between neighbouring utterances, as a fraction of the
// shorter one. Keeps overlap strictly pairwise and same-speaker utterances
// apart (round-robin scheduling puts >= 2 utterances between repeats).
constexpr double kJunctionCap = 0.45;
constexpr double kHotSpotStaggerS = 0.04;
constexpr double kHotSpotGapS = 0.5;

Eigen::Index to_samples(double seconds, int sample_rate) {
  return Eigen::Index(std::llround(seconds * sample_rate));
}

// Voss-McCartney pink-ish noise, unit RMS.
std::vector<double> pink_noise(std::mt19937_64& rng, std::size_t n) {
  constexpr int kRows = 16;
  std::array<double, kRows> rows{};
  for (auto& r : rows) r = uniform(rng, -1.0, 1.0);
  std::vector<double> out(n);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const int z = std::countr_zero(i);
      if (z < kRows) rows[std::size_t(z)] = uniform(rng, -1.0, 1.0);
    }
    double v = uniform(rng, -1.0, 1.0);
    for (double r : rows) v += r;
    out[i] = v;
    sum_sq += v * v;
  }
  const double rms = std::sqrt(sum_sq / double(std::max<std::size_t>(n, 1)));
  if (rms > 0.0) {
    for (auto& v : out) v /= rms;
  }
  return out;
}

struct Placement {
  int speaker = 0;
  Eigen::Index begin = 0;
  Eigen::Index length = 0;
  double gain = 1.0;
  std::uint64_t seed = 0;
};

}  // namespace

void SessionSpec::validate() const {
  if (sample_rate < 1000) {
    throw ConfigError("sample_rate too low: " + std::to_string(sample_rate));
  }
  if (duration_s <= 0.0) {
    throw ConfigError("duration_s must be positive");
  }
  if (num_speakers < 1 || num_speakers > 3) {
    throw ConfigError("num_speakers must be 1, 2 or 3, got " +
                      std::to_string(num_speakers));
  }
  if (overlap_ratio < 0.0 || overlap_ratio > 0.6) {
    throw ConfigError(
        "overlap_ratio must lie in [0, 0.6] (junction caps make higher "
        "ratios unreachable), got " + std::to_string(overlap_ratio));
  }
  if (num_speakers == 1 && overlap_ratio > 0.0) {
    throw ConfigError("overlap_ratio must be 0 for a single speaker");
  }
  if (!(utterance_min_s > 0.0 && utterance_min_s <= utterance_max_s)) {
    throw ConfigError("utterance_min_s/utterance_max_s range is not ordered");
  }
  if (gain_min_db > gain_max_db) {
    throw ConfigError("gain_min_db/gain_max_db range is not ordered");
  }
  if (snr_min_db > snr_max_db) {
    throw ConfigError("snr_min_db/snr_max_db range is not ordered");
  }
  if (!(silence_min_s >= 0.0 && silence_min_s <= silence_max_s)) {
    throw ConfigError("silence_min_s/silence_max_s range is not ordered");
  }
  if (hot_spot_count < 0) {
    throw ConfigError("hot_spot_count must be >= 0");
  }
  if (hot_spot_count > 0 && num_speakers < 3) {
    throw ConfigError("hot_spot_count requires num_speakers = 3");
  }
}

std::vector<double> gen_source(std::uint64_t seed, double duration_s,
                               int speaker_id, int sample_rate) {
  const Eigen::Index n = to_samples(duration_s, sample_rate);
  if (n < 1) {
    throw std::invalid_argument("gen_source: empty duration");
  }
  auto rng = substream(seed, "source/" + std::to_string(speaker_id));

  // 90..289.5 Hz in 10.5 Hz steps. Walking the 20-slot grid with a stride
  // of 7 keeps distinct ids >= 10 Hz apart while pushing neighbouring ids
  // far from each other, so their combs rarely land in the same bins.
  const double f0 = 90.0 + 10.5 * double((speaker_id * 7) % 20);
  const double drift_rate = uniform(rng, 0.1, 0.5);
  const double drift_phase = uniform(rng, 0.0, kTwoPi);
  const double am_rate = uniform(rng, 2.0, 8.0);
  const double am_phase = uniform(rng, 0.0, kTwoPi);
  const int harmonics = std::max(1, int(4000.0 / f0));

  // Two formant-like resonances give each voice its own coloring, so even
  // where two combs collide the weaker side barely registers. Centers are
  // pinned to the id (stable timbre) with a small per-utterance wobble.
  const double f1 = 300.0 + 90.0 * double((speaker_id * 3) % 7) +
                    uniform(rng, -40.0, 40.0);
  const double f2 = 1200.0 + 190.0 * double((speaker_id * 5) % 8) +
                    uniform(rng, -60.0, 60.0);
  const auto resonance = [](double f, double center, double width) {
    const double d = (f - center) / width;
    return 1.0 / (1.0 + d * d);
  };
  std::vector<double> weight(static_cast<std::size_t>(harmonics) + 1, 0.0);
  for (int k = 1; k <= harmonics; ++k) {
    const double f = double(k) * f0;
    weight[std::size_t(k)] =
        (0.15 + resonance(f, f1, 160.0) + 0.6 * resonance(f, f2, 320.0)) /
        double(k);
  }

  std::vector<double> out(static_cast<std::size_t>(n));
  double theta = uniform(rng, 0.0, kTwoPi);
  double power = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = double(i) / sample_rate;
    const double f =
        f0 * (1.0 + 0.03 * std::sin(kTwoPi * drift_rate * t + drift_phase));
    theta += kTwoPi * f / sample_rate;
    double v = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      v += weight[std::size_t(k)] * std::sin(double(k) * theta);
    }
    // Deep syllable-rate modulation: the voice nearly gates off in the
    // troughs, which is what lets ratio masks pull overlapped frames apart.
    v *= 1.0 + 0.85 * std::sin(kTwoPi * am_rate * t + am_phase);
    out[std::size_t(i)] = v;
    power += v * v;
  }

  // -30 dB noise floor, lightly smoothed to tame the top octave.
  const double noise_rms =
      std::sqrt(power / double(n)) * std::pow(10.0, -30.0 / 20.0);
  double prev = 0.0;
  for (auto& v : out) {
    const double white = uniform(rng, -1.0, 1.0);
    const double smoothed = 0.5 * (white + prev);
    prev = white;
    v += noise_rms * smoothed * 1.7320508;  // restore unit variance-ish
  }

  double sum_sq = 0.0;
  for (double v : out) sum_sq += v * v;
  const double rms = std::sqrt(sum_sq / double(n));
  for (auto& v : out) v /= rms;
  return out;
}

double measure_overlap(const SessionTruth& truth) {
  if (truth.mixture.empty()) return 0.0;
  std::vector<int> delta(truth.mixture.size() + 1, 0);
  for (const auto& speaker : truth.activity) {
    for (const auto& iv : speaker) {
      delta[std::size_t(iv.begin)] += 1;
      delta[std::size_t(iv.end)] -= 1;
    }
  }
  std::size_t speech = 0;
  std::size_t overlapped = 0;
  int active = 0;
  for (std::size_t i = 0; i < truth.mixture.size(); ++i) {
    active += delta[i];
    if (active >= 1) ++speech;
    if (active >= 2) ++overlapped;
  }
  return speech == 0 ? 0.0 : double(overlapped) / double(speech);
}

SessionTruth mix_session(const SessionSpec& spec) {
  spec.validate();
  const int sr = spec.sample_rate;
  const Eigen::Index total = to_samples(spec.duration_s, sr);

  auto layout_rng = substream(spec.seed, "layout/" + spec.name);
  auto gain_rng = substream(spec.seed, "gains/" + spec.name);
  auto noise_rng = substream(spec.seed, "noise/" + spec.name);
  auto snr_rng = substream(spec.seed, "snr/" + spec.name);

  // Hot-spot clusters are planned first so the base timeline can budget both
  // its playing time and its share of the overlap target.
  std::vector<double> cluster_len_s(std::size_t(spec.hot_spot_count));
  double cluster_speech_s = 0.0;   // union speech time of all clusters
  double cluster_overlap_s = 0.0;  // >= 2 active time of all clusters
  for (auto& len : cluster_len_s) {
    len = uniform(layout_rng, 1.2, 1.8);
    cluster_speech_s += len + 2.0 * kHotSpotStaggerS;
    cluster_overlap_s += len - kHotSpotStaggerS;
  }
  const double cluster_span_s =
      cluster_speech_s + kHotSpotGapS * (spec.hot_spot_count + 1) +
      0.1 * spec.hot_spot_count;
  const Eigen::Index base_budget =
      total - to_samples(cluster_span_s, sr);
  if (base_budget < to_samples(spec.utterance_max_s, sr)) {
    throw ConfigError("duration_s too short for the requested hot_spot_count");
  }

  SessionTruth truth;
  truth.sample_rate = sr;
  truth.refs.assign(std::size_t(spec.num_speakers),
                    std::vector<double>(std::size_t(total), 0.0));
  truth.activity.assign(std::size_t(spec.num_speakers), {});

  // Base timeline: alternate speakers, steering each junction's overlap (or
  // gap) toward the requested session-level ratio.
  const double r = spec.overlap_ratio;
  std::vector<Placement> placements;
  double placed_len_s = 0.0;    // sum of placed utterance lengths
  double overlap_s = 0.0;       // accumulated junction overlap
  Eigen::Index cursor_end = 0;  // end of the last placed utterance
  int utt_index = 0;
  while (true) {
    const double len_s =
        uniform(layout_rng, spec.utterance_min_s, spec.utterance_max_s);
    const Eigen::Index len = to_samples(len_s, sr);
    Eigen::Index begin = 0;
    if (!placements.empty()) {
      // Cumulative overlap the session should have once this utterance is
      // in, counting the hot-spot clusters' fixed contribution.
      const double target =
          (r * (placed_len_s + len_s) + r * cluster_speech_s -
           cluster_overlap_s) /
          (1.0 + r);
      const double needed = std::max(0.0, target - overlap_s);
      const double cap =
          kJunctionCap * std::min(len_s, double(placements.back().length) / sr);
      if (needed > 0.0) {
        const double o = std::min(needed, cap);
        begin = cursor_end - to_samples(o, sr);
        overlap_s += o;
      } else {
        begin = cursor_end +
                to_samples(uniform(layout_rng, spec.silence_min_s,
                                   spec.silence_max_s),
                           sr);
      }
    }
    if (begin + len > base_budget) break;
    Placement p;
    p.speaker = utt_index % spec.num_speakers;
    p.begin = begin;
    p.length = len;
    p.gain = std::pow(
        10.0, uniform(gain_rng, spec.gain_min_db, spec.gain_max_db) / 20.0);
    p.seed = spec.seed ^ hash64("utterance/" + std::to_string(utt_index));
    placements.push_back(p);
    placed_len_s += len_s;
    cursor_end = begin + len;
    ++utt_index;
  }
  if (placements.empty()) {
    throw ConfigError("duration_s too short for even one utterance");
  }

  // Hot-spot clusters: three staggered same-length utterances.
  Eigen::Index cluster_cursor = cursor_end + to_samples(kHotSpotGapS, sr);
  const Eigen::Index stagger = to_samples(kHotSpotStaggerS, sr);
  for (double len_s : cluster_len_s) {
    const Eigen::Index len = to_samples(len_s, sr);
    for (int s = 0; s < 3; ++s) {
      Placement p;
      p.speaker = s;
      p.begin = cluster_cursor + s * stagger;
      p.length = len;
      p.gain = std::pow(
          10.0, uniform(gain_rng, spec.gain_min_db, spec.gain_max_db) / 20.0);
      p.seed = spec.seed ^ hash64("hotspot/" + std::to_string(utt_index));
      placements.push_back(p);
      ++utt_index;
    }
    truth.hot_spots.push_back(
        Interval{cluster_cursor + 2 * stagger, cluster_cursor + len});
    cluster_cursor += len + 2 * stagger + to_samples(kHotSpotGapS, sr);
    if (cluster_cursor > total) {
      throw ConfigError("duration_s too short for the requested"
                        " hot_spot_count");
    }
  }

  for (const auto& p : placements) {
    const std::vector<double> utt =
        gen_source(p.seed, double(p.length) / sr, p.speaker, sr);
    auto& ref = truth.refs[std::size_t(p.speaker)];
    for (Eigen::Index i = 0; i < p.length && p.begin + i < total; ++i) {
      ref[std::size_t(p.begin + i)] += p.gain * utt[std::size_t(i)];
    }
    truth.activity[std::size_t(p.speaker)].push_back(
        Interval{p.begin, std::min(p.begin + p.length, total)});
  }

  // Noise at the drawn SNR against the summed speech power.
  truth.noise = pink_noise(noise_rng, std::size_t(total));
  double speech_power = 0.0;
  for (Eigen::Index i = 0; i < total; ++i) {
    double v = 0.0;
    for (const auto& ref : truth.refs) v += ref[std::size_t(i)];
    speech_power += v * v;
  }
  speech_power /= double(total);
  const double snr_db = uniform(snr_rng, spec.snr_min_db, spec.snr_max_db);
  const double noise_power = speech_power > 0.0
                                 ? speech_power / std::pow(10.0, snr_db / 10.0)
                                 : 1e-4;
  const double noise_scale = std::sqrt(noise_power);
  for (auto& v : truth.noise) v *= noise_scale;

  truth.mixture.assign(std::size_t(total), 0.0);
  for (Eigen::Index i = 0; i < total; ++i) {
    double v = truth.noise[std::size_t(i)];
    for (const auto& ref : truth.refs) v += ref[std::size_t(i)];
    truth.mixture[std::size_t(i)] = v;
  }

  truth.realized_overlap = measure_overlap(truth);
  if (spec.duration_s >= 60.0 && spec.hot_spot_count == 0 &&
      std::abs(truth.realized_overlap - spec.overlap_ratio) > 0.02) {
    throw ConfigError(
        "overlap_ratio " + std::to_string(spec.overlap_ratio) +
        " not achievable with these utterance settings; realized " +
        std::to_string(truth.realized_overlap));
  }
  RCSS_INFO << "session " << spec.name << ": " << placements.size()
              << " utterances, overlap " << truth.realized_overlap;
  return truth;
}

SessionSpectra analyze_session(const SessionTruth& truth,
                               const StftConfig& cfg) {
  SessionSpectra spectra;
  spectra.mixture = stft(truth.mixture, cfg);
  spectra.mixture_mag = magnitude(spectra.mixture);
  spectra.ref_mags.reserve(truth.refs.size());
  for (const auto& ref : truth.refs) {
    spectra.ref_mags.push_back(magnitude(stft(ref, cfg)));
  }
  spectra.noise_mag = magnitude(stft(truth.noise, cfg));
  return spectra;
}

OracleContext truth_block_context(const SessionSpectra& spectra,
                                  const BlockRange& block,
                                  const WindowConfig& window,
                                  double activity_threshold) {
  OracleContext ctx;
  const MagnitudeSpectrogram mix_block =
      block_magnitude(spectra.mixture_mag, block, window);
  const double mix_energy = mix_block.data.square().sum();
  for (std::size_t s = 0; s < spectra.ref_mags.size(); ++s) {
    MagnitudeSpectrogram ref_block =
        block_magnitude(spectra.ref_mags[s], block, window);
    const double energy = ref_block.data.square().sum();
    if (mix_energy <= 0.0 || energy / mix_energy <= activity_threshold) {
      continue;
    }
    Eigen::Index onset = 0;
    for (Eigen::Index t = 0; t < ref_block.data.rows(); ++t) {
      if (ref_block.data.row(t).square().sum() > 1e-20) {
        onset = t;
        break;
      }
    }
    ctx.source_ids.push_back(int(s));
    ctx.source_mags.push_back(std::move(ref_block.data));
    ctx.onsets.push_back(onset);
  }
  ctx.noise_mag =
      block_magnitude(spectra.noise_mag, block, window).data;
  return ctx;
}

ContextProvider make_truth_context_provider(const SessionSpectra& spectra,
                                            const WindowConfig& window,
                                            double activity_threshold) {
  // The spectra must outlive the provider; the pipeline holds them per run.
  return [&spectra, window, activity_threshold](const BlockRange& block) {
    return truth_block_context(spectra, block, window, activity_threshold);
  };
}

std::vector<int> truth_block_counts(const SessionSpectra& spectra,
                                    const std::vector<BlockRange>& blocks,
                                    const WindowConfig& window,
                                    double activity_threshold) {
  std::vector<int> counts;
  counts.reserve(blocks.size());
  for (const auto& block : blocks) {
    counts.push_back(int(
        truth_block_context(spectra, block, window, activity_threshold)
            .source_ids.size()));
  }
  return counts;
}

}  // namespace rcss
