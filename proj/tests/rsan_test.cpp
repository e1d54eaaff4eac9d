// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/rsan.hpp"

#include <vector>

#include "doctest.h"
#include "rcss/random.hpp"
#include "test_support.hpp"

using namespace rcss;
using rcss_test::ScriptedEstimator;
using rcss_test::const_mask;

namespace {

constexpr Eigen::Index kT = 3;
constexpr Eigen::Index kF = 4;

IterationResult step(double speaker, double noise, double flag) {
  return IterationResult{const_mask(kT, kF, speaker), const_mask(kT, kF, noise),
                         flag};
}

MagnitudeSpectrogram flat_mixture() {
  return MagnitudeSpectrogram{RealMatrix::Constant(kT, kF, 1.0)};
}

}  // namespace

TEST_SUITE_BEGIN("rsan");

TEST_CASE("stop policy thresholds extend their last value") {
  StopPolicy stop;
  stop.thresholds = {0.6, 0.1};
  CHECK(stop.threshold_for(0) == 0.6);
  CHECK(stop.threshold_for(1) == 0.1);
  CHECK(stop.threshold_for(7) == 0.1);
  CHECK_NOTHROW(stop.validate());

  stop.thresholds = {};
  CHECK_THROWS_AS(stop.validate(), ConfigError);
  stop.thresholds = {1.0};
  CHECK_THROWS_AS(stop.validate(), ConfigError);
  stop.thresholds = {0.5};
  stop.max_iterations = 0;
  CHECK_THROWS_AS(stop.validate(), ConfigError);
}

TEST_CASE("recursion stops on the first flag above the threshold") {
  // Third iteration flags 0.3 > 0.1 (second threshold), so two survive.
  ScriptedEstimator est({step(0.2, 0.05, 0.0), step(0.3, 0.0, 0.0),
                         step(0.1, 0.0, 0.3), step(0.1, 0.0, 1.0)});
  StopPolicy stop;
  stop.thresholds = {0.6, 0.1};
  const BlockResult out =
      separate_block(flat_mixture(), Mask::ones(kT, kF), est, stop);
  CHECK(out.iterations() == 2);
  REQUIRE(out.flags.size() == 2);
  CHECK(out.flags[0] == 0.0);
  CHECK(out.flags[1] == 0.0);
  CHECK(est.calls() == 3);  // the firing iteration still ran
  // Masks of the firing iteration are discarded.
  CHECK(out.speaker_masks[0].data(0, 0) == 0.2);
  CHECK(out.speaker_masks[1].data(0, 0) == 0.3);
  CHECK(out.noise_mask.data(0, 0) == doctest::Approx(0.05));
}

TEST_CASE("a flag equal to the threshold continues the recursion") {
  ScriptedEstimator est({step(0.2, 0.0, 0.6), step(0.2, 0.0, 0.7)});
  StopPolicy stop;  // {0.6}
  const BlockResult out =
      separate_block(flat_mixture(), Mask::ones(kT, kF), est, stop);
  CHECK(out.iterations() == 1);
  CHECK(out.flags[0] == 0.6);
}

TEST_CASE("max_iterations bounds the recursion") {
  ScriptedEstimator est({step(0.1, 0.0, 0.0)});
  StopPolicy stop;
  stop.max_iterations = 4;
  const BlockResult out =
      separate_block(flat_mixture(), Mask::ones(kT, kF), est, stop);
  CHECK(out.iterations() == 4);
  CHECK(est.calls() == 4);
}

TEST_CASE("noise masks accumulate with a clamp") {
  ScriptedEstimator est({step(0.1, 0.7, 0.0), step(0.1, 0.7, 0.0)});
  StopPolicy stop;
  stop.max_iterations = 2;
  const BlockResult out =
      separate_block(flat_mixture(), Mask::ones(kT, kF), est, stop);
  CHECK(out.iterations() == 2);
  CHECK(out.noise_mask.data.maxCoeff() == 1.0);  // 1.4 clamped
  CHECK(out.noise_mask.data.minCoeff() == 1.0);
}

TEST_CASE("fixed-iteration mode ignores the flags but records them") {
  ScriptedEstimator est({step(0.2, 0.0, 0.9), step(0.2, 0.0, 0.95)});
  const BlockResult out = separate_block_fixed(flat_mixture(),
                                               Mask::ones(kT, kF), est, 2);
  CHECK(out.iterations() == 2);
  CHECK(out.flags[0] == 0.9);
  CHECK(out.flags[1] == 0.95);
  CHECK_THROWS_AS(
      separate_block_fixed(flat_mixture(), Mask::ones(kT, kF), est, 0),
      std::invalid_argument);
}

TEST_CASE("contract violations are rejected") {
  StopPolicy stop;

  ScriptedEstimator bad_flag({step(0.2, 0.0, 1.5)});
  CHECK_THROWS_AS(
      separate_block(flat_mixture(), Mask::ones(kT, kF), bad_flag, stop),
      ContractError);

  ScriptedEstimator neg_flag({step(0.2, 0.0, -0.1)});
  CHECK_THROWS_AS(
      separate_block(flat_mixture(), Mask::ones(kT, kF), neg_flag, stop),
      ContractError);

  ScriptedEstimator bad_shape({IterationResult{
      const_mask(kT + 1, kF, 0.2), const_mask(kT, kF, 0.0), 0.0}});
  CHECK_THROWS_AS(
      separate_block(flat_mixture(), Mask::ones(kT, kF), bad_shape, stop),
      ContractError);

  ScriptedEstimator ok({step(0.2, 0.0, 0.0)});
  CHECK_THROWS_AS(
      separate_block(flat_mixture(), Mask::ones(kT + 1, kF), ok, stop),
      std::invalid_argument);  // residual/mixture mismatch

  CHECK_THROWS_AS(Mask(RealMatrix::Constant(kT, kF, 1.5)), ContractError);
  CHECK_THROWS_AS(Mask(RealMatrix::Constant(kT, kF, -0.2)), ContractError);
}

TEST_CASE("update_residual subtracts and clamps at zero") {
  ResidualMask r = const_mask(kT, kF, 0.5);
  IterationResult it = step(0.3, 0.4, 0.0);

  const ResidualMask both =
      update_residual(r, it, SubtractionPolicy::kSpeakerAndNoise);
  CHECK(both.data.maxCoeff() == 0.0);  // 0.5 - 0.3 - 0.4 clamps

  const ResidualMask speaker_only =
      update_residual(r, it, SubtractionPolicy::kSpeakerOnly);
  CHECK(speaker_only.data(0, 0) == doctest::Approx(0.2));

  it.speaker_mask = const_mask(kT + 1, kF, 0.1);
  CHECK_THROWS_AS(update_residual(r, it, SubtractionPolicy::kSpeakerAndNoise),
                  std::invalid_argument);
}

TEST_CASE("residual trace is the initial value plus one entry per iteration") {
  ScriptedEstimator est({step(0.25, 0.1, 0.0), step(0.25, 0.1, 0.0)});
  StopPolicy stop;
  stop.max_iterations = 2;
  SeparateOptions options;
  options.keep_residual_trace = true;
  const BlockResult out = separate_block(flat_mixture(), Mask::ones(kT, kF),
                                         est, stop, options);
  REQUIRE(out.residual_trace.size() == 3);
  CHECK(out.residual_trace[0].data(0, 0) == 1.0);
  CHECK(out.residual_trace[1].data(0, 0) == doctest::Approx(0.65));
  CHECK(out.residual_trace[2].data(0, 0) == doctest::Approx(0.30));

  // Without the option the trace stays empty.
  ScriptedEstimator est2({step(0.25, 0.1, 0.0)});
  const BlockResult quiet =
      separate_block(flat_mixture(), Mask::ones(kT, kF), est2, stop);
  CHECK(quiet.residual_trace.empty());
}

TEST_CASE("mass conservation without clamping") {
  // Small masks never push the residual below zero, so the removed mass
  // equals the sum of the accepted masks exactly.
  ScriptedEstimator est({step(0.2, 0.05, 0.0), step(0.15, 0.05, 0.0),
                         step(0.1, 0.05, 0.0)});
  StopPolicy stop;
  stop.max_iterations = 3;
  SeparateOptions options;
  options.keep_residual_trace = true;
  const BlockResult out = separate_block(flat_mixture(), Mask::ones(kT, kF),
                                         est, stop, options);
  REQUIRE(out.iterations() == 3);
  RealMatrix removed =
      out.residual_trace.front().data - out.residual_trace.back().data;
  RealMatrix claimed = RealMatrix::Zero(kT, kF);
  for (const auto& m : out.speaker_masks) claimed += m.data;
  claimed += RealMatrix::Constant(kT, kF, 3 * 0.05);  // scripted noise masks
  CHECK((removed - claimed).abs().maxCoeff() < 1e-12);
}

TEST_CASE("residual invariants hold over random recursions") {
  auto rng = substream(99, "residual-property");
  int clamped_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int iters = 1 + int(uniform(rng, 0.0, 3.999));
    std::vector<IterationResult> steps;
    for (int i = 0; i < iters; ++i) {
      steps.push_back(IterationResult{rcss_test::random_mask(rng, kT, kF),
                                      rcss_test::random_mask(rng, kT, kF),
                                      0.0});
    }
    ScriptedEstimator est(steps);
    const ResidualMask start = rcss_test::random_mask(rng, kT, kF);
    SeparateOptions options;
    options.keep_residual_trace = true;
    const BlockResult out =
        separate_block_fixed(flat_mixture(), start, est, iters, options);

    REQUIRE(out.residual_trace.size() == size_t(iters) + 1);
    for (size_t k = 0; k < out.residual_trace.size(); ++k) {
      const auto& res = out.residual_trace[k].data;
      CHECK(res.minCoeff() >= 0.0);
      CHECK(res.maxCoeff() <= 1.0);
      if (k > 0) {
        const auto& prev = out.residual_trace[k - 1].data;
        CHECK((prev - res).minCoeff() >= 0.0);  // entrywise non-increasing
        // Clamp fired whenever plain subtraction would have gone negative.
        const RealMatrix raw = prev - out.speaker_masks[k - 1].data -
                               steps[k - 1].noise_mask.data;
        if (raw.minCoeff() < -1e-12) ++clamped_cases;
      }
    }
  }
  CHECK(clamped_cases > 100);  // the clamp path is genuinely exercised
}

TEST_SUITE_END();
