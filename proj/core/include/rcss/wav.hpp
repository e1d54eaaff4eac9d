// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

namespace rcss {

enum class WavFormat {
  kPcm16,    // integer samples, clipped to [-1, 1)
  kFloat32,  // IEEE float samples, written verbatim
};

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // mono
};

// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
// A nonzero expected_rate rejects files at any other rate; there is no
// resampler. Throws ConfigError on anything unsupported.
WavData read_wav(const std::string& path, int expected_rate = 0);

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format = WavFormat::kFloat32);

}  // namespace rcss
