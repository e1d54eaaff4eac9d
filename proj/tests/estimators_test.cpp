// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/estimators.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rcss/css.hpp"
#include "rcss/random.hpp"
#include "rcss/rsan.hpp"
#include "test_support.hpp"

using namespace rcss;
using rcss_test::banded_block;
using rcss_test::SyntheticBlock;

TEST_SUITE_BEGIN("estimators");

TEST_CASE("oracle emits ratio masks strongest-first and then stops") {
  SyntheticBlock blk = banded_block(2, 12, 9, 42);
  // Double the second source so it outranks the first.
  blk.mixture.data -= blk.context.source_mags[1];
  blk.context.source_mags[1] *= 2.0;
  blk.mixture.data += blk.context.source_mags[1];

  OracleRsanEstimator oracle;
  oracle.reset_block(blk.context);
  const ResidualMask all_one = Mask::ones(12, 9);

  const IterationResult first = oracle.estimate(blk.mixture, all_one);
  CHECK(first.stop_flag == 0.0);
  CHECK(oracle.emitted_ids() == std::vector<int>{1});

  // Ideal ratio mask of the stronger source, denominator = sum + noise.
  RealMatrix denom = blk.context.noise_mag + blk.context.source_mags[0] +
                     blk.context.source_mags[1];
  RealMatrix irm = blk.context.source_mags[1] / denom;
  CHECK((first.speaker_mask.data - irm).abs().maxCoeff() < 1e-9);
  // First iteration carries the full noise ratio mask.
  CHECK((first.noise_mask.data - blk.context.noise_mag / denom)
            .abs()
            .maxCoeff() < 1e-9);

  const ResidualMask after = update_residual(all_one, first,
                                             SubtractionPolicy::kSpeakerAndNoise);
  const IterationResult second = oracle.estimate(blk.mixture, after);
  CHECK(second.stop_flag == 0.0);
  CHECK(oracle.emitted_ids() == std::vector<int>{1, 0});
  CHECK(second.noise_mask.data.maxCoeff() == 0.0);  // only the first has it

  const ResidualMask final_res = update_residual(
      after, second, SubtractionPolicy::kSpeakerAndNoise);
  const IterationResult third = oracle.estimate(blk.mixture, final_res);
  CHECK(third.stop_flag == 1.0);
  CHECK(third.speaker_mask.data.maxCoeff() == 0.0);
}

TEST_CASE("oracle masks partition the mixture") {
  SyntheticBlock blk = banded_block(3, 10, 12, 7);
  RsanBackend backend(std::make_unique<OracleRsanEstimator>(), StopPolicy{});
  const BlockSeparation sep =
      backend.separate(blk.mixture, Mask::ones(10, 12), &blk.context);
  REQUIRE(sep.speaker_masks.size() == 3);

  RealMatrix sum = sep.noise_mask.data;
  for (const auto& m : sep.speaker_masks) sum += m.data;
  CHECK((sum - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("oracle selection ties break to the lowest index") {
  // Two identical sources; the residual-weighted energies tie exactly.
  const Eigen::Index t = 6, f = 4;
  OracleContext ctx;
  ctx.noise_mag = RealMatrix::Constant(t, f, 0.1);
  ctx.source_ids = {0, 1};
  ctx.onsets = {0, 0};
  ctx.source_mags = {RealMatrix::Constant(t, f, 1.0),
                     RealMatrix::Constant(t, f, 1.0)};
  MagnitudeSpectrogram mixture{RealMatrix::Constant(t, f, 2.1)};

  OracleRsanEstimator oracle;
  oracle.reset_block(ctx);
  oracle.estimate(mixture, Mask::ones(t, f));
  CHECK(oracle.emitted_ids() == std::vector<int>{0});
}

TEST_CASE("oracle flags 1.0 when remaining sources fall below the threshold") {
  // Second source carries ~1e-4 of the block energy, below the 5% default.
  const Eigen::Index t = 8, f = 6;
  OracleContext ctx;
  ctx.noise_mag = RealMatrix::Constant(t, f, 0.05);
  ctx.source_ids = {0, 1};
  ctx.onsets = {0, 0};
  ctx.source_mags = {RealMatrix::Constant(t, f, 1.0),
                     RealMatrix::Constant(t, f, 0.01)};
  MagnitudeSpectrogram mixture{ctx.noise_mag + ctx.source_mags[0] +
                               ctx.source_mags[1]};

  RsanBackend backend(std::make_unique<OracleRsanEstimator>(), StopPolicy{});
  const BlockSeparation sep =
      backend.separate(mixture, Mask::ones(t, f), &ctx);
  CHECK(sep.speaker_masks.size() == 1);  // the faint source is never counted
}

TEST_CASE("oracle requires reset and matching shapes") {
  OracleRsanEstimator oracle;
  MagnitudeSpectrogram mixture{RealMatrix::Constant(4, 4, 1.0)};
  CHECK_THROWS_AS(oracle.estimate(mixture, Mask::ones(4, 4)),
                  std::logic_error);

  SyntheticBlock blk = banded_block(1, 4, 4, 1);
  oracle.reset_block(blk.context);
  CHECK_THROWS_AS(oracle.estimate(mixture, Mask::ones(5, 4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(OracleRsanEstimator(0.0), ConfigError);
  CHECK_THROWS_AS(OracleRsanEstimator(0.05, 0.6), ConfigError);
}

TEST_CASE("leak mixes in the other sources' masks") {
  SyntheticBlock blk = banded_block(2, 8, 8, 13);
  RealMatrix denom = blk.context.noise_mag + blk.context.source_mags[0] +
                     blk.context.source_mags[1];

  OracleRsanEstimator leaky(0.05, 0.3);
  leaky.reset_block(blk.context);
  const IterationResult it =
      leaky.estimate(blk.mixture, Mask::ones(8, 8));
  const int picked = leaky.emitted_ids()[0];
  const int other = 1 - picked;
  RealMatrix expected =
      0.7 * (blk.context.source_mags[size_t(picked)] / denom) +
      0.3 * (blk.context.source_mags[size_t(other)] / denom);
  CHECK((it.speaker_mask.data - expected).abs().maxCoeff() < 1e-9);

  // leak = 0 reproduces the clean oracle exactly.
  OracleRsanEstimator plain(0.05, 0.0);
  OracleRsanEstimator zero_leak(0.05, 0.0);
  plain.reset_block(blk.context);
  zero_leak.reset_block(blk.context);
  const auto a = plain.estimate(blk.mixture, Mask::ones(8, 8));
  const auto b = zero_leak.estimate(blk.mixture, Mask::ones(8, 8));
  CHECK((a.speaker_mask.data - b.speaker_mask.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("upit emits every active source at once in onset order") {
  SyntheticBlock blk = banded_block(2, 12, 8, 5);
  // Make source 1 start earlier than source 0 to decouple onset from id.
  blk.context.onsets = {4, 1};

  OracleUpitEstimator upit(3);
  upit.reset_block(blk.context);
  const UpitBlockOutput out = upit.estimate_all(blk.mixture);
  REQUIRE(out.speaker_masks.size() == 3);
  CHECK(out.overflow == 0);
  CHECK(out.dropped_ids.empty());

  RealMatrix denom = blk.context.noise_mag + blk.context.source_mags[0] +
                     blk.context.source_mags[1];
  // Channel 0 is the earlier-onset source (id 1), channel 1 the other.
  CHECK((out.speaker_masks[0].data -
         blk.context.source_mags[1] / denom).abs().maxCoeff() < 1e-9);
  CHECK((out.speaker_masks[1].data -
         blk.context.source_mags[0] / denom).abs().maxCoeff() < 1e-9);
  CHECK(out.speaker_masks[2].data.maxCoeff() == 0.0);  // zero padding
}

TEST_CASE("upit drops the weakest sources on overflow") {
  SyntheticBlock blk = banded_block(3, 10, 12, 9);
  // Rank the sources by construction: 0 strong, 2 medium, 1 weak. The weak
  // one stays well above the activity threshold so the drop is a real choice.
  blk.mixture.data -= blk.context.source_mags[0];
  blk.mixture.data -= blk.context.source_mags[1];
  blk.context.source_mags[0] *= 1.5;
  blk.context.source_mags[1] *= 0.7;
  blk.mixture.data += blk.context.source_mags[0];
  blk.mixture.data += blk.context.source_mags[1];

  OracleUpitEstimator upit(2);
  upit.reset_block(blk.context);
  const UpitBlockOutput out = upit.estimate_all(blk.mixture);
  CHECK(out.overflow == 1);
  CHECK(out.dropped_ids == std::vector<int>{1});
  REQUIRE(out.speaker_masks.size() == 2);

  OracleUpitEstimator unprimed(2);
  CHECK_THROWS_AS(unprimed.estimate_all(blk.mixture), std::logic_error);
  CHECK_THROWS_AS(OracleUpitEstimator(0), ConfigError);
}

TEST_CASE("toy estimator produces valid sigmoid masks and flags") {
  ToyEstimator toy(9, 123);
  SyntheticBlock blk = banded_block(1, 6, 9, 77);
  const IterationResult it = toy.estimate(blk.mixture, Mask::ones(6, 9));
  CHECK(it.speaker_mask.data.minCoeff() > 0.0);
  CHECK(it.speaker_mask.data.maxCoeff() < 1.0);
  CHECK(it.noise_mask.data.minCoeff() > 0.0);
  CHECK(it.stop_flag > 0.0);
  CHECK(it.stop_flag < 1.0);

  // Deterministic per seed, distinct across seeds.
  ToyEstimator again(9, 123);
  const IterationResult it2 = again.estimate(blk.mixture, Mask::ones(6, 9));
  CHECK((it.speaker_mask.data - it2.speaker_mask.data).abs().maxCoeff() ==
        0.0);
  ToyEstimator other(9, 124);
  const IterationResult it3 = other.estimate(blk.mixture, Mask::ones(6, 9));
  CHECK((it.speaker_mask.data - it3.speaker_mask.data).abs().maxCoeff() >
        0.0);

  MagnitudeSpectrogram wrong{RealMatrix::Constant(6, 5, 1.0)};
  CHECK_THROWS_AS(toy.estimate(wrong, Mask::ones(6, 5)),
                  std::invalid_argument);
}

namespace {

std::vector<ToySample> toy_dataset(uint64_t seed, int samples) {
  std::vector<ToySample> out;
  for (int i = 0; i < samples; ++i) {
    SyntheticBlock blk = banded_block(1, 6, 9, seed + uint64_t(i), 0.8);
    ToySample sample;
    sample.mixture = blk.mixture;
    sample.refs = {MagnitudeSpectrogram{blk.context.source_mags[0]}};
    sample.noise = MagnitudeSpectrogram{blk.context.noise_mag};
    out.push_back(std::move(sample));
  }
  return out;
}

// Applies +delta to one coordinate picked by a flat index over the whole
// parameter vector; returns false when the index is past the end.
bool nudge(ToyParams& p, Eigen::Index flat, double delta) {
  const Eigen::Index n = p.spk_b.size();
  Eigen::ArrayXd* arrays[] = {&p.spk_w_mix,   &p.spk_w_res,   &p.spk_b,
                              &p.noise_w_mix, &p.noise_w_res, &p.noise_b};
  for (auto* a : arrays) {
    if (flat < n) {
      (*a)[flat] += delta;
      return true;
    }
    flat -= n;
  }
  if (flat == 0) {
    p.flag_w += delta;
    return true;
  }
  if (flat == 1) {
    p.flag_b += delta;
    return true;
  }
  return false;
}

double pick(const ToyParams& p, Eigen::Index flat) {
  const Eigen::Index n = p.spk_b.size();
  const Eigen::ArrayXd* arrays[] = {&p.spk_w_mix,   &p.spk_w_res,   &p.spk_b,
                                    &p.noise_w_mix, &p.noise_w_res, &p.noise_b};
  for (const auto* a : arrays) {
    if (flat < n) return (*a)[flat];
    flat -= n;
  }
  return flat == 0 ? p.flag_w : p.flag_b;
}

}  // namespace

TEST_CASE("toy parameter gradient matches finite differences") {
  const auto dataset = toy_dataset(31, 2);
  ToyEstimator toy(9, 55);
  const double alpha = 0.05;

  ToyParams analytic = ToyParams::zeros(9);
  for (const auto& sample : dataset) {
    analytic += toy_loss_gradient(toy, sample, alpha);
  }
  analytic *= 1.0 / double(dataset.size());

  const double h = 1e-5;
  const Eigen::Index total = 6 * 9 + 2;
  for (Eigen::Index flat = 0; flat < total; flat += 7) {  // sampled coords
    ToyParams up = toy.params();
    ToyParams down = toy.params();
    REQUIRE(nudge(up, flat, h));
    REQUIRE(nudge(down, flat, -h));
    const double loss_up = toy_total_loss(ToyEstimator(up), dataset, alpha);
    const double loss_down =
        toy_total_loss(ToyEstimator(down), dataset, alpha);
    const double numeric = (loss_up - loss_down) / (2.0 * h);
    const double exact = pick(analytic, flat);
    const double rel =
        std::abs(exact - numeric) / std::max(1e-8, std::abs(numeric));
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("toy training reduces the loss and stays deterministic") {
  const auto dataset = toy_dataset(47, 3);
  const ToyEstimator init(9, 71);
  const double before = toy_total_loss(init, dataset);
  const ToyEstimator trained = toy_train(init, dataset, 40, 0.5);
  const double after = toy_total_loss(trained, dataset);
  CHECK(after < before);

  const ToyEstimator trained2 = toy_train(init, dataset, 40, 0.5);
  CHECK(toy_total_loss(trained2, dataset) == after);

  const ToyEstimator untouched = toy_train(init, dataset, 0, 0.5);
  CHECK(toy_total_loss(untouched, dataset) == before);

  CHECK_THROWS_AS(toy_train(init, {}, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(toy_train(init, dataset, -1, 0.5), std::invalid_argument);
}

TEST_SUITE_END();
