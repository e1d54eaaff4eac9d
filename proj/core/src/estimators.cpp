// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rcss/log.hpp"
#include "rcss/random.hpp"
#include "rcss/rsan.hpp"

namespace rcss {
namespace {

// Keeps 0/0 out of the ratio masks; any real magnitude dwarfs this.
constexpr double kDenomGuard = 1e-300;

void check_context_shape(const OracleContext& ctx,
                         const MagnitudeSpectrogram& mixture) {
  if (ctx.noise_mag.rows() != mixture.data.rows() ||
      ctx.noise_mag.cols() != mixture.data.cols()) {
    throw std::invalid_argument("oracle context does not match the block");
  }
}

RealMatrix ratio_mask(const RealMatrix& numerator, const RealMatrix& denom) {
  return numerator / (denom + kDenomGuard);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

OracleRsanEstimator::OracleRsanEstimator(double activity_threshold,
                                         double leak)
    : activity_threshold_(activity_threshold), leak_(leak) {
  if (!(activity_threshold > 0.0 && activity_threshold < 1.0)) {
    throw ConfigError("activity threshold must lie in (0, 1), got " +
                      std::to_string(activity_threshold));
  }
  if (!(leak >= 0.0 && leak <= 0.5)) {
    throw ConfigError("leak must lie in [0, 0.5], got " +
                      std::to_string(leak));
  }
}

void OracleRsanEstimator::reset_block(const OracleContext& context) {
  if (context.source_mags.size() != context.source_ids.size()) {
    throw std::invalid_argument("oracle context ids/mags length mismatch");
  }
  context_ = context;
  denom_ = context_.noise_mag;
  for (const auto& mag : context_.source_mags) {
    if (mag.rows() != denom_.rows() || mag.cols() != denom_.cols()) {
      throw std::invalid_argument("oracle context source shape mismatch");
    }
    denom_ += mag;
  }
  emitted_.assign(context_.source_mags.size(), 0);
  emitted_ids_.clear();
  iteration_ = 0;
  has_context_ = true;
}

IterationResult OracleRsanEstimator::estimate(
    const MagnitudeSpectrogram& mixture, const ResidualMask& residual) {
  if (!has_context_) {
    throw std::logic_error("OracleRsanEstimator: reset_block not called");
  }
  check_context_shape(context_, mixture);
  if (residual.data.rows() != mixture.data.rows() ||
      residual.data.cols() != mixture.data.cols()) {
    throw std::invalid_argument("residual does not match the block");
  }

  const double mix_energy = mixture.data.square().sum();
  int pick = -1;
  double pick_energy = -1.0;
  bool any_active = false;
  for (std::size_t s = 0; s < context_.source_mags.size(); ++s) {
    if (emitted_[s]) continue;
    const double energy =
        (residual.data * context_.source_mags[s]).square().sum();
    if (mix_energy > 0.0 && energy / mix_energy > activity_threshold_) {
      any_active = true;
    }
    if (energy > pick_energy) {  // strict: first (lowest index) wins ties
      pick_energy = energy;
      pick = int(s);
    }
  }

  const Eigen::Index rows = mixture.data.rows();
  const Eigen::Index cols = mixture.data.cols();
  Mask noise = iteration_ == 0
                   ? Mask::clamped(ratio_mask(context_.noise_mag, denom_))
                   : Mask::zeros(rows, cols);
  ++iteration_;

  if (!any_active) {
    // Nothing left worth extracting; the engine discards these masks.
    return IterationResult{Mask::zeros(rows, cols), std::move(noise), 1.0};
  }

  RealMatrix mask = ratio_mask(context_.source_mags[pick], denom_);
  if (leak_ > 0.0) {
    RealMatrix others = RealMatrix::Zero(rows, cols);
    for (std::size_t s = 0; s < context_.source_mags.size(); ++s) {
      if (int(s) == pick) continue;
      others += ratio_mask(context_.source_mags[s], denom_);
    }
    mask = (1.0 - leak_) * mask + leak_ * others;
  }
  emitted_[std::size_t(pick)] = 1;
  emitted_ids_.push_back(context_.source_ids[std::size_t(pick)]);
  return IterationResult{Mask::clamped(std::move(mask)), std::move(noise),
                         0.0};
}

std::unique_ptr<MaskEstimator> OracleRsanEstimator::clone() const {
  return std::make_unique<OracleRsanEstimator>(*this);
}

OracleUpitEstimator::OracleUpitEstimator(int channels,
                                         double activity_threshold)
    : channels_(channels), activity_threshold_(activity_threshold) {
  if (channels < 1) {
    throw ConfigError("channel count must be positive, got " +
                      std::to_string(channels));
  }
  if (!(activity_threshold > 0.0 && activity_threshold < 1.0)) {
    throw ConfigError("activity threshold must lie in (0, 1), got " +
                      std::to_string(activity_threshold));
  }
}

void OracleUpitEstimator::reset_block(const OracleContext& context) {
  if (context.source_mags.size() != context.source_ids.size() ||
      context.onsets.size() != context.source_ids.size()) {
    throw std::invalid_argument("oracle context field length mismatch");
  }
  context_ = context;
  has_context_ = true;
}

UpitBlockOutput OracleUpitEstimator::estimate_all(
    const MagnitudeSpectrogram& mixture) {
  if (!has_context_) {
    throw std::logic_error("OracleUpitEstimator: reset_block not called");
  }
  check_context_shape(context_, mixture);

  RealMatrix denom = context_.noise_mag;
  for (const auto& mag : context_.source_mags) denom += mag;

  const double mix_energy = mixture.data.square().sum();
  std::vector<std::size_t> active;
  for (std::size_t s = 0; s < context_.source_mags.size(); ++s) {
    const double energy = context_.source_mags[s].square().sum();
    if (mix_energy > 0.0 && energy / mix_energy > activity_threshold_) {
      active.push_back(s);
    }
  }

  UpitBlockOutput out{{},
                      Mask::clamped(ratio_mask(context_.noise_mag, denom)),
                      0,
                      {}};
  if (int(active.size()) > channels_) {
    // More talkers than channels: keep the strongest, log the rest.
    std::stable_sort(active.begin(), active.end(),
                     [&](std::size_t a, std::size_t b) {
                       return context_.source_mags[a].square().sum() >
                              context_.source_mags[b].square().sum();
                     });
    for (std::size_t i = std::size_t(channels_); i < active.size(); ++i) {
      out.dropped_ids.push_back(context_.source_ids[active[i]]);
      ++out.overflow;
    }
    active.resize(std::size_t(channels_));
    RCSS_WARN << "upit overflow: dropped " << out.overflow << " source(s)";
  }
  std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    if (context_.onsets[a] != context_.onsets[b]) {
      return context_.onsets[a] < context_.onsets[b];
    }
    return context_.source_ids[a] < context_.source_ids[b];
  });

  for (std::size_t s : active) {
    out.speaker_masks.push_back(
        Mask::clamped(ratio_mask(context_.source_mags[s], denom)));
  }
  while (int(out.speaker_masks.size()) < channels_) {
    out.speaker_masks.push_back(
        Mask::zeros(mixture.data.rows(), mixture.data.cols()));
  }
  return out;
}

ToyParams ToyParams::zeros(Eigen::Index bins) {
  ToyParams p;
  p.spk_w_mix = Eigen::ArrayXd::Zero(bins);
  p.spk_w_res = Eigen::ArrayXd::Zero(bins);
  p.spk_b = Eigen::ArrayXd::Zero(bins);
  p.noise_w_mix = Eigen::ArrayXd::Zero(bins);
  p.noise_w_res = Eigen::ArrayXd::Zero(bins);
  p.noise_b = Eigen::ArrayXd::Zero(bins);
  return p;
}

ToyParams& ToyParams::operator+=(const ToyParams& other) {
  spk_w_mix += other.spk_w_mix;
  spk_w_res += other.spk_w_res;
  spk_b += other.spk_b;
  noise_w_mix += other.noise_w_mix;
  noise_w_res += other.noise_w_res;
  noise_b += other.noise_b;
  flag_w += other.flag_w;
  flag_b += other.flag_b;
  return *this;
}

ToyParams& ToyParams::operator*=(double scale) {
  spk_w_mix *= scale;
  spk_w_res *= scale;
  spk_b *= scale;
  noise_w_mix *= scale;
  noise_w_res *= scale;
  noise_b *= scale;
  flag_w *= scale;
  flag_b *= scale;
  return *this;
}

double ToyParams::max_abs() const {
  double m = std::max(std::abs(flag_w), std::abs(flag_b));
  for (const auto* a : {&spk_w_mix, &spk_w_res, &spk_b, &noise_w_mix,
                        &noise_w_res, &noise_b}) {
    if (a->size() > 0) m = std::max(m, a->abs().maxCoeff());
  }
  return m;
}

ToyEstimator::ToyEstimator(Eigen::Index bins, std::uint64_t seed)
    : params_(ToyParams::zeros(bins)) {
  auto rng = substream(seed, "toy-init");
  auto draw = [&](Eigen::ArrayXd& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a[i] = uniform(rng, -0.1, 0.1);
    }
  };
  draw(params_.spk_w_mix);
  draw(params_.spk_w_res);
  draw(params_.spk_b);
  draw(params_.noise_w_mix);
  draw(params_.noise_w_res);
  draw(params_.noise_b);
  params_.flag_w = uniform(rng, -0.1, 0.1);
  params_.flag_b = uniform(rng, -0.1, 0.1);
}

ToyEstimator::ToyEstimator(ToyParams params) : params_(std::move(params)) {}

IterationResult ToyEstimator::estimate(const MagnitudeSpectrogram& mixture,
                                       const ResidualMask& residual) {
  const Eigen::Index bins = mixture.data.cols();
  if (bins != params_.spk_b.size()) {
    throw std::invalid_argument("toy estimator bin count mismatch");
  }
  auto affine_sigmoid = [&](const Eigen::ArrayXd& w_mix,
                            const Eigen::ArrayXd& w_res,
                            const Eigen::ArrayXd& b) {
    RealMatrix pre = mixture.data.rowwise() * w_mix.transpose() +
                     residual.data.rowwise() * w_res.transpose();
    pre.rowwise() += b.transpose();
    return RealMatrix(1.0 / (1.0 + (-pre).exp()));
  };
  const double mean_res_sq = residual.data.square().mean();
  return IterationResult{
      Mask(affine_sigmoid(params_.spk_w_mix, params_.spk_w_res, params_.spk_b)),
      Mask(affine_sigmoid(params_.noise_w_mix, params_.noise_w_res,
                          params_.noise_b)),
      sigmoid(params_.flag_w * mean_res_sq + params_.flag_b)};
}

std::unique_ptr<MaskEstimator> ToyEstimator::clone() const {
  return std::make_unique<ToyEstimator>(*this);
}

namespace {

void check_toy_sample(const ToySample& sample) {
  if (sample.refs.empty()) {
    throw std::invalid_argument("toy sample has no references");
  }
  if (sample.mixture.data.rows() > 32 || sample.mixture.data.cols() > 32) {
    throw std::invalid_argument("toy samples must be at most 32x32");
  }
}

// Forward pass for one sample: one accepted iteration per reference.
BlockResult toy_forward(const ToyEstimator& estimator,
                        const ToySample& sample) {
  check_toy_sample(sample);
  auto working = estimator;  // estimate() is non-const on the interface
  SeparateOptions options;
  options.keep_residual_trace = true;
  return separate_block_fixed(
      sample.mixture,
      Mask::ones(sample.mixture.data.rows(), sample.mixture.data.cols()),
      working, int(sample.refs.size()), options);
}

double toy_sample_loss(const ToyEstimator& estimator, const ToySample& sample,
                       double alpha) {
  const BlockResult fwd = toy_forward(estimator, sample);
  return total_loss(fwd.speaker_masks, fwd.noise_mask, fwd.flags,
                    sample.mixture, sample.refs, sample.noise, alpha)
      .total;
}

}  // namespace

double toy_total_loss(const ToyEstimator& estimator,
                      const std::vector<ToySample>& dataset, double alpha) {
  if (dataset.empty()) {
    throw std::invalid_argument("toy dataset is empty");
  }
  double sum = 0.0;
  for (const auto& sample : dataset) {
    sum += toy_sample_loss(estimator, sample, alpha);
  }
  return sum / double(dataset.size());
}

ToyParams toy_loss_gradient(const ToyEstimator& estimator,
                            const ToySample& sample, double alpha) {
  const BlockResult fwd = toy_forward(estimator, sample);
  const auto& params = estimator.params();
  const Eigen::Index bins = sample.mixture.data.cols();
  ToyParams grad = ToyParams::zeros(bins);

  const auto perm =
      best_permutation(fwd.speaker_masks, sample.mixture, sample.refs);
  const MaskGradients mask_grads =
      mse_loss_grad_masks(fwd.speaker_masks, fwd.noise_mask, sample.mixture,
                          sample.refs, sample.noise, perm);

  // Chain a T x F upstream gradient through sigmoid(affine(Y, R)).
  auto add_affine_grad = [&](const RealMatrix& upstream, const Mask& mask,
                             const ResidualMask& residual,
                             Eigen::ArrayXd& g_w_mix, Eigen::ArrayXd& g_w_res,
                             Eigen::ArrayXd& g_b) {
    const RealMatrix local = upstream * mask.data * (1.0 - mask.data);
    g_w_mix += (local * sample.mixture.data).colwise().sum().transpose();
    g_w_res += (local * residual.data).colwise().sum().transpose();
    g_b += local.colwise().sum().transpose();
  };

  const FlagTarget target(int(sample.refs.size()));
  for (std::size_t i = 0; i < fwd.speaker_masks.size(); ++i) {
    const ResidualMask& residual = fwd.residual_trace[i];
    add_affine_grad(mask_grads.speakers[i], fwd.speaker_masks[i], residual,
                    grad.spk_w_mix, grad.spk_w_res, grad.spk_b);
    // The block noise mask is the sum over iterations, so each iteration's
    // noise output sees the same upstream gradient.
    IterationResult iter =
        ToyEstimator(params).estimate(sample.mixture, residual);
    add_affine_grad(mask_grads.noise, iter.noise_mask, residual,
                    grad.noise_w_mix, grad.noise_w_res, grad.noise_b);

    const double flag = fwd.flags[i];
    if (flag > kFlagEps && flag < 1.0 - kFlagEps) {
      const double z = target.z[i];
      const double d_flag = alpha * (-z / flag + (1.0 - z) / (1.0 - flag));
      const double d_pre = d_flag * flag * (1.0 - flag);
      grad.flag_w += d_pre * residual.data.square().mean();
      grad.flag_b += d_pre;
    }
  }
  return grad;
}

ToyEstimator toy_train(const ToyEstimator& init,
                       const std::vector<ToySample>& dataset, int steps,
                       double lr, double alpha) {
  if (dataset.empty()) {
    throw std::invalid_argument("toy dataset is empty");
  }
  if (steps < 0) {
    throw std::invalid_argument("negative step count");
  }
  ToyEstimator current = init;
  for (int step = 0; step < steps; ++step) {
    const double loss = toy_total_loss(current, dataset, alpha);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("toy training diverged at step " +
                               std::to_string(step));
    }
    ToyParams grad = ToyParams::zeros(current.params().spk_b.size());
    for (const auto& sample : dataset) {
      grad += toy_loss_gradient(current, sample, alpha);
    }
    grad *= lr / double(dataset.size());
    grad *= -1.0;
    current.params() += grad;
  }
  if (!std::isfinite(toy_total_loss(current, dataset, alpha))) {
    throw std::runtime_error("toy training diverged at step " +
                             std::to_string(steps));
  }
  return current;
}

}  // namespace rcss
