// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/simulator.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rcss/random.hpp"
#include "test_support.hpp"

using namespace rcss;

namespace {

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / double(x.size()));
}

double correlation(const std::vector<double>& a,
                   const std::vector<double>& b) {
  double num = 0.0, ea = 0.0, eb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    ea += a[i] * a[i];
    eb += b[i] * b[i];
  }
  return num / std::sqrt(ea * eb);
}

SessionSpec base_spec(uint64_t seed, double overlap, double duration) {
  SessionSpec spec;
  spec.name = "sim-test";
  spec.seed = seed;
  spec.duration_s = duration;
  spec.overlap_ratio = overlap;
  return spec;
}

}  // namespace

TEST_SUITE_BEGIN("simulator");

TEST_CASE("spec validation names the offending field") {
  SessionSpec spec;
  CHECK_NOTHROW(spec.validate());

  spec.overlap_ratio = 0.7;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.overlap_ratio = 0.3;

  spec.num_speakers = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // 1 speaker cannot overlap
  spec.overlap_ratio = 0.0;
  CHECK_NOTHROW(spec.validate());
  spec.num_speakers = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.num_speakers = 2;

  spec.hot_spot_count = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // needs three speakers
  spec.num_speakers = 3;
  CHECK_NOTHROW(spec.validate());
  spec.hot_spot_count = 0;

  spec.utterance_min_s = 3.0;  // above max
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.utterance_min_s = 1.5;
  spec.silence_min_s = 0.9;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("gen_source is deterministic, unit RMS and speaker-distinct") {
  const auto a = gen_source(5, 1.0, 0);
  const auto b = gen_source(5, 1.0, 0);
  CHECK(a == b);
  CHECK(a.size() == 16000);
  CHECK(rms(a) == doctest::Approx(1.0).epsilon(1e-9));

  const auto c = gen_source(5, 1.0, 1);
  CHECK(rms(c) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(correlation(a, c)) < 0.2);  // different fundamentals

  const auto d = gen_source(6, 1.0, 0);
  CHECK(std::abs(correlation(a, d)) < 0.9);  // same pitch, new phases

  CHECK_THROWS_AS(gen_source(5, 0.0, 0), std::invalid_argument);
}

TEST_CASE("mixture equals references plus noise exactly") {
  const SessionTruth truth = mix_session(base_spec(21, 0.3, 10.0));
  REQUIRE(truth.refs.size() == 2);
  for (size_t i = 0; i < truth.mixture.size(); ++i) {
    double v = truth.noise[i];
    for (const auto& ref : truth.refs) v += ref[i];
    CHECK(truth.mixture[i] == v);  // same summation order as the generator
  }
}

TEST_CASE("generation is deterministic per seed") {
  const SessionTruth a = mix_session(base_spec(33, 0.2, 8.0));
  const SessionTruth b = mix_session(base_spec(33, 0.2, 8.0));
  CHECK(a.mixture == b.mixture);
  CHECK(a.noise == b.noise);
  CHECK(a.realized_overlap == b.realized_overlap);

  const SessionTruth c = mix_session(base_spec(34, 0.2, 8.0));
  CHECK(a.mixture != c.mixture);
}

TEST_CASE("long sessions land within two points of the requested overlap") {
  for (double target : {0.0, 0.1, 0.3, 0.4}) {
    SessionSpec spec = base_spec(7, target, 60.0);
    spec.name = "ovl" + std::to_string(int(target * 100));
    const SessionTruth truth = mix_session(spec);
    CHECK(std::abs(truth.realized_overlap - target) <= 0.02);
    CHECK(truth.realized_overlap ==
          doctest::Approx(measure_overlap(truth)));
  }
}

TEST_CASE("single-speaker sessions never overlap themselves") {
  SessionSpec spec = base_spec(9, 0.0, 20.0);
  spec.num_speakers = 1;
  const SessionTruth truth = mix_session(spec);
  CHECK(truth.realized_overlap == 0.0);
  REQUIRE(truth.refs.size() == 1);
  // Activity intervals are disjoint and ordered.
  const auto& ivs = truth.activity[0];
  REQUIRE(!ivs.empty());
  for (size_t i = 1; i < ivs.size(); ++i) {
    CHECK(ivs[i].begin >= ivs[i - 1].end);
  }
}

TEST_CASE("hot spots put three simultaneous speakers on the timeline") {
  SessionSpec spec = base_spec(41, 0.2, 30.0);
  spec.num_speakers = 3;
  spec.hot_spot_count = 2;
  const SessionTruth truth = mix_session(spec);
  REQUIRE(truth.hot_spots.size() == 2);
  for (const Interval& spot : truth.hot_spots) {
    CHECK(spot.end > spot.begin);
    // Every speaker has an activity interval covering the triple region.
    for (int s = 0; s < 3; ++s) {
      bool covered = false;
      for (const Interval& iv : truth.activity[size_t(s)]) {
        if (iv.begin <= spot.begin && iv.end >= spot.end) covered = true;
      }
      CHECK(covered);
    }
  }
}

TEST_CASE("infeasible requests fail with a config error") {
  CHECK_THROWS_AS(mix_session(base_spec(1, 0.7, 30.0)), ConfigError);

  SessionSpec tiny = base_spec(1, 0.0, 0.5);  // shorter than one utterance
  CHECK_THROWS_AS(mix_session(tiny), ConfigError);

  SessionSpec crowded = base_spec(1, 0.2, 8.0);
  crowded.num_speakers = 3;
  crowded.hot_spot_count = 4;  // cannot fit four clusters in eight seconds
  CHECK_THROWS_AS(mix_session(crowded), ConfigError);
}

TEST_CASE("noise level follows the requested snr") {
  SessionSpec spec = base_spec(55, 0.0, 20.0);
  spec.num_speakers = 2;
  spec.snr_min_db = 20.0;
  spec.snr_max_db = 20.0;
  const SessionTruth truth = mix_session(spec);

  double speech = 0.0;
  for (size_t i = 0; i < truth.mixture.size(); ++i) {
    double v = 0.0;
    for (const auto& ref : truth.refs) v += ref[i];
    speech += v * v;
  }
  double noise = 0.0;
  for (double v : truth.noise) noise += v * v;
  const double snr_db = 10.0 * std::log10(speech / noise);
  CHECK(snr_db == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("block context includes exactly the audible sources") {
  SessionSpec spec = base_spec(61, 0.25, 20.0);
  const SessionTruth truth = mix_session(spec);
  const StftConfig stft;
  const SessionSpectra spectra = analyze_session(truth, stft);
  WindowConfig window;
  const auto blocks = segment(spectra.mixture_mag.data.rows(), window);

  int nonempty = 0;
  for (const auto& block : blocks) {
    const OracleContext ctx =
        truth_block_context(spectra, block, window, 0.05);
    REQUIRE(ctx.source_ids.size() == ctx.source_mags.size());
    REQUIRE(ctx.source_ids.size() == ctx.onsets.size());
    CHECK(ctx.noise_mag.rows() == window.block_frames());

    // Recompute the energy rule independently.
    const MagnitudeSpectrogram mix_block =
        block_magnitude(spectra.mixture_mag, block, window);
    const double mix_energy = mix_block.data.square().sum();
    std::vector<int> expected;
    for (size_t s = 0; s < spectra.ref_mags.size(); ++s) {
      const MagnitudeSpectrogram ref_block =
          block_magnitude(spectra.ref_mags[s], block, window);
      if (mix_energy > 0.0 &&
          ref_block.data.square().sum() / mix_energy > 0.05) {
        expected.push_back(int(s));
      }
    }
    CHECK(ctx.source_ids == expected);
    if (!ctx.source_ids.empty()) ++nonempty;

    for (size_t s = 0; s < ctx.source_mags.size(); ++s) {
      const Eigen::Index onset = ctx.onsets[s];
      if (onset > 0) {
        CHECK(ctx.source_mags[s].topRows(onset).square().sum() <= 1e-20);
      }
      CHECK(ctx.source_mags[s].row(onset).square().sum() > 1e-20);
    }
  }
  CHECK(nonempty > int(blocks.size()) / 2);

  const auto counts = truth_block_counts(spectra, blocks, window, 0.05);
  REQUIRE(counts.size() == blocks.size());
  for (size_t k = 0; k < blocks.size(); ++k) {
    const OracleContext ctx =
        truth_block_context(spectra, blocks[k], window, 0.05);
    CHECK(counts[k] == int(ctx.source_ids.size()));
  }
}

TEST_SUITE_END();
