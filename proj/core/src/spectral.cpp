// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace rcss {
namespace {

// Samples whose analysis-window sum falls below this fraction of the COLA
// constant see only the extreme taper of a single frame. Dividing there
// amplifies whatever a mask edit leaked into the frame edges (hundreds of
// times at the very first samples), so they synthesize to zero instead.
constexpr double kCoverageFraction = 0.5;

// FFTW plan creation is not thread-safe; execution through the new-array
// interface is. One r2c/c2r plan pair is cached per transform size.
class FftPlans {
 public:
  static FftPlans& of(int n) {
    static std::mutex mu;
    static std::map<int, FftPlans*> cache;
    std::scoped_lock lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, new FftPlans(n)).first;
    return *it->second;
  }

  void forward(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(r2c_, in, reinterpret_cast<fftw_complex*>(out));
  }

  // Unnormalized inverse; destroys `in`.
  void inverse(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  explicit FftPlans(int n) {
    std::vector<double> re(static_cast<size_t>(n));
    std::vector<std::complex<double>> cx(size_t(n) / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    r2c_ = fftw_plan_dft_r2c_1d(n, re.data(),
                                reinterpret_cast<fftw_complex*>(cx.data()),
                                flags);
    c2r_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cx.data()),
                                re.data(), flags);
  }

  fftw_plan r2c_;
  fftw_plan c2r_;
};

}  // namespace

void StftConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("stft: sample_rate must be > 0");
  if (frame_len <= 0 || (frame_len & (frame_len - 1)) != 0)
    throw ConfigError("stft: frame_len must be a power of two");
  if (hop_len <= 0 || frame_len % hop_len != 0)
    throw ConfigError("stft: hop_len must divide frame_len");
}

Eigen::ArrayXd analysis_window(int frame_len) {
  Eigen::ArrayXd w(frame_len);
  for (int n = 0; n < frame_len; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / frame_len);
  return w;
}

Eigen::Index stft_frame_count(size_t signal_len, const StftConfig& cfg) {
  if (signal_len < size_t(cfg.frame_len)) return 0;
  return Eigen::Index((signal_len - size_t(cfg.frame_len)) /
                      size_t(cfg.hop_len)) +
         1;
}

size_t synthesis_length(Eigen::Index frames, const StftConfig& cfg) {
  if (frames <= 0) return 0;
  return size_t(frames - 1) * size_t(cfg.hop_len) + size_t(cfg.frame_len);
}

ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.size() < size_t(cfg.frame_len))
    throw std::invalid_argument("input too short");

  const int n = cfg.frame_len;
  const int hop = cfg.hop_len;
  const Eigen::Index frames = stft_frame_count(signal.size(), cfg);
  const Eigen::Index bins = cfg.bins();
  const Eigen::ArrayXd window = analysis_window(n);
  const FftPlans& fft = FftPlans::of(n);

  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.data.resize(frames, bins);

  std::vector<double> buf(static_cast<size_t>(n));
  std::vector<std::complex<double>> row(static_cast<size_t>(bins));
  for (Eigen::Index t = 0; t < frames; ++t) {
    const double* frame = signal.data() + size_t(t) * size_t(hop);
    for (int i = 0; i < n; ++i) buf[size_t(i)] = frame[i] * window[i];
    fft.forward(buf.data(), row.data());
    for (Eigen::Index f = 0; f < bins; ++f) spec.data(t, f) = row[size_t(f)];
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins() != cfg.bins())
    throw std::invalid_argument("istft: spectrogram bins do not match config");

  const int n = cfg.frame_len;
  const int hop = cfg.hop_len;
  const Eigen::Index frames = spec.frames();
  const size_t out_len = synthesis_length(frames, cfg);
  const Eigen::ArrayXd window = analysis_window(n);
  const FftPlans& fft = FftPlans::of(n);

  std::vector<double> acc(out_len, 0.0);
  std::vector<double> wsum(out_len, 0.0);
  std::vector<std::complex<double>> row(size_t(cfg.bins()));
  std::vector<double> frame(static_cast<size_t>(n));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < cfg.bins(); ++f) row[size_t(f)] = spec.data(t, f);
    fft.inverse(row.data(), frame.data());
    const size_t base = size_t(t) * size_t(hop);
    for (int i = 0; i < n; ++i) {
      acc[base + size_t(i)] += frame[size_t(i)] / double(n);
      wsum[base + size_t(i)] += window[i];
    }
  }
  // Periodic Hann at any integer overlap sums to 0.5 * frame / hop.
  const double cola = 0.5 * double(n) / double(hop);
  const double covered = kCoverageFraction * cola;
  for (size_t i = 0; i < out_len; ++i)
    acc[i] = wsum[i] >= covered ? acc[i] / wsum[i] : 0.0;
  return acc;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag;
  mag.data = spec.data.abs();
  return mag;
}

ComplexSpectrogram apply_mask(const Mask& mask, const ComplexSpectrogram& spec) {
  if (mask.frames() != spec.frames() || mask.bins() != spec.bins())
    throw std::invalid_argument("apply_mask: shape mismatch");
  ComplexSpectrogram out;
  out.config = spec.config;
  out.data = spec.data * mask.data;
  return out;
}

}  // namespace rcss
