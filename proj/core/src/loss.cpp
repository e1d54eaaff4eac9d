// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rcss {
namespace {

void check_shapes(const std::vector<Mask>& est_speakers, const Mask& est_noise,
                  const MagnitudeSpectrogram& mixture,
                  const std::vector<MagnitudeSpectrogram>& refs,
                  const MagnitudeSpectrogram& noise_ref) {
  if (est_speakers.empty()) {
    throw std::invalid_argument("loss: no speaker estimates");
  }
  if (est_speakers.size() != refs.size()) {
    throw std::invalid_argument("loss: estimate/reference count mismatch");
  }
  const auto rows = mixture.data.rows();
  const auto cols = mixture.data.cols();
  auto same = [&](const RealMatrix& m) {
    return m.rows() == rows && m.cols() == cols;
  };
  for (const auto& m : est_speakers) {
    if (!same(m.data)) throw std::invalid_argument("loss: mask shape mismatch");
  }
  for (const auto& r : refs) {
    if (!same(r.data)) {
      throw std::invalid_argument("loss: reference shape mismatch");
    }
  }
  if (!same(est_noise.data) || !same(noise_ref.data)) {
    throw std::invalid_argument("loss: noise shape mismatch");
  }
}

void check_perm(const std::vector<int>& perm, std::size_t n) {
  if (perm.size() != n) {
    throw std::invalid_argument("loss: permutation length mismatch");
  }
  std::vector<bool> seen(n, false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[p]) {
      throw std::invalid_argument("loss: not a permutation");
    }
    seen[p] = true;
  }
}

// Speaker term at one pairing, without the 1/(S*T*F) normalization.
double speaker_sse(const std::vector<Mask>& est,
                   const MagnitudeSpectrogram& mixture,
                   const std::vector<MagnitudeSpectrogram>& refs,
                   const std::vector<int>& perm) {
  double sse = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    sse += (est[i].data * mixture.data - refs[perm[i]].data).square().sum();
  }
  return sse;
}

}  // namespace

FlagTarget::FlagTarget(int num_sources) {
  if (num_sources < 1) {
    throw std::invalid_argument("FlagTarget: need at least one source");
  }
  z.assign(static_cast<std::size_t>(num_sources), 0.0);
  z.back() = 1.0;
}

double mse_loss(const std::vector<Mask>& est_speakers, const Mask& est_noise,
                const MagnitudeSpectrogram& mixture,
                const std::vector<MagnitudeSpectrogram>& refs,
                const MagnitudeSpectrogram& noise_ref,
                const std::vector<int>& perm) {
  check_shapes(est_speakers, est_noise, mixture, refs, noise_ref);
  check_perm(perm, est_speakers.size());
  const double tf =
      static_cast<double>(mixture.data.rows() * mixture.data.cols());
  const double s = static_cast<double>(est_speakers.size());
  const double spk = speaker_sse(est_speakers, mixture, refs, perm) / (s * tf);
  const double noise =
      (est_noise.data * mixture.data - noise_ref.data).square().sum() / tf;
  return spk + noise;
}

std::vector<int> best_permutation(
    const std::vector<Mask>& est_speakers, const MagnitudeSpectrogram& mixture,
    const std::vector<MagnitudeSpectrogram>& refs) {
  if (est_speakers.size() != refs.size()) {
    throw std::invalid_argument("loss: estimate/reference count mismatch");
  }
  const int s = static_cast<int>(est_speakers.size());
  if (s > kMaxPermutationSources) {
    throw std::invalid_argument("permutation search too large");
  }
  std::vector<int> perm(est_speakers.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_sse = std::numeric_limits<double>::infinity();
  do {
    const double sse = speaker_sse(est_speakers, mixture, refs, perm);
    if (sse < best_sse) {
      best_sse = sse;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double flag_loss(const std::vector<double>& est_flags,
                 const FlagTarget& target) {
  if (est_flags.size() != target.z.size()) {
    throw std::invalid_argument("flag_loss: flag/target count mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < est_flags.size(); ++i) {
    const double f =
        std::clamp(est_flags[i], kFlagEps, 1.0 - kFlagEps);
    const double z = target.z[i];
    loss += -(z * std::log(f) + (1.0 - z) * std::log(1.0 - f));
  }
  return loss;
}

LossBreakdown total_loss(const std::vector<Mask>& est_speakers,
                         const Mask& est_noise,
                         const std::vector<double>& est_flags,
                         const MagnitudeSpectrogram& mixture,
                         const std::vector<MagnitudeSpectrogram>& refs,
                         const MagnitudeSpectrogram& noise_ref, double alpha) {
  LossBreakdown out;
  out.best_permutation = best_permutation(est_speakers, mixture, refs);
  out.mse = mse_loss(est_speakers, est_noise, mixture, refs, noise_ref,
                     out.best_permutation);
  out.flag =
      flag_loss(est_flags, FlagTarget(static_cast<int>(est_speakers.size())));
  out.total = out.mse + alpha * out.flag;
  return out;
}

double upit_loss(const std::vector<Mask>& est_speakers, const Mask& est_noise,
                 const MagnitudeSpectrogram& mixture,
                 std::vector<MagnitudeSpectrogram> refs,
                 const MagnitudeSpectrogram& noise_ref) {
  if (refs.size() > est_speakers.size()) {
    throw std::invalid_argument("upit_loss: more references than channels");
  }
  while (refs.size() < est_speakers.size()) {
    refs.push_back(MagnitudeSpectrogram{
        RealMatrix::Zero(mixture.data.rows(), mixture.data.cols())});
  }
  const auto perm = best_permutation(est_speakers, mixture, refs);
  return mse_loss(est_speakers, est_noise, mixture, refs, noise_ref, perm);
}

MaskGradients mse_loss_grad_masks(const std::vector<Mask>& est_speakers,
                                  const Mask& est_noise,
                                  const MagnitudeSpectrogram& mixture,
                                  const std::vector<MagnitudeSpectrogram>& refs,
                                  const MagnitudeSpectrogram& noise_ref,
                                  const std::vector<int>& perm) {
  check_shapes(est_speakers, est_noise, mixture, refs, noise_ref);
  check_perm(perm, est_speakers.size());
  const double tf =
      static_cast<double>(mixture.data.rows() * mixture.data.cols());
  const double s = static_cast<double>(est_speakers.size());
  MaskGradients grads;
  grads.speakers.reserve(est_speakers.size());
  for (std::size_t i = 0; i < est_speakers.size(); ++i) {
    grads.speakers.push_back(
        (2.0 / (s * tf)) *
        (est_speakers[i].data * mixture.data - refs[perm[i]].data) *
        mixture.data);
  }
  grads.noise = (2.0 / tf) * (est_noise.data * mixture.data - noise_ref.data) *
                mixture.data;
  return grads;
}

}  // namespace rcss
