// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "rcss/types.hpp"

namespace rcss {

// Analysis/synthesis parameters. The periodic Hann window satisfies the
// constant-overlap-add condition whenever hop_len divides frame_len, which
// validate() enforces together with the power-of-two frame length.
//
// Defaults are chosen so that a 2.4 s block spans exactly 150 frames and a
// 0.8 s hop spans exactly 50 frames at 16 kHz.
struct StftConfig {
  int sample_rate = 16000;
  int frame_len = 512;
  int hop_len = 256;

  void validate() const;  // throws ConfigError
  Eigen::Index bins() const { return frame_len / 2 + 1; }
  double frames_per_second() const {
    return double(sample_rate) / double(hop_len);
  }
};

struct ComplexSpectrogram {
  ComplexMatrix data;  // T x F
  StftConfig config;

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index bins() const { return data.cols(); }
};

struct MagnitudeSpectrogram {
  RealMatrix data;  // T x F, entries >= 0

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index bins() const { return data.cols(); }
};

// Periodic Hann window of the given length.
Eigen::ArrayXd analysis_window(int frame_len);

// Frames produced for a signal of the given length:
// floor((len - frame_len) / hop_len) + 1.
Eigen::Index stft_frame_count(size_t signal_len, const StftConfig& cfg);

// Samples reconstructed by istft(): (T - 1) * hop_len + frame_len.
size_t synthesis_length(Eigen::Index frames, const StftConfig& cfg);

// Windowed short-time Fourier analysis. Throws std::invalid_argument
// ("input too short") for signals shorter than one frame.
ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& cfg);

// Overlap-add synthesis normalized by the per-sample window sum. Samples
// whose window sum stays under half the COLA constant (the outer taper of
// the first and last frame) come out as zero; everything inside the
// overlap-covered interior reconstructs the analyzed signal to float
// precision.
std::vector<double> istft(const ComplexSpectrogram& spec);

// Entrywise complex modulus.
MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

// Entrywise product of a mask with a complex spectrogram (mixture-phase
// reconstruction). Throws std::invalid_argument on shape mismatch.
ComplexSpectrogram apply_mask(const Mask& mask, const ComplexSpectrogram& spec);

}  // namespace rcss
