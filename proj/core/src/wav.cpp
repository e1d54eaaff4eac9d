// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "rcss/types.hpp"

namespace rcss {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;

uint32_t read_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return uint16_t(p[0]) | uint16_t(p[1]) << 8;
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ConfigError("not a RIFF/WAVE file: " + path);
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_begin = 0, data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t len = read_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size())
      throw ConfigError("truncated WAV chunk in " + path);
    if (!std::memcmp(id, "fmt ", 4)) {
      if (len < 16) throw ConfigError("malformed fmt chunk in " + path);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (!std::memcmp(id, "data", 4)) {
      data_begin = body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_begin == 0)
    throw ConfigError("missing fmt/data chunk in " + path);
  if (channels != 1)
    throw ConfigError("only mono WAV supported: " + path);
  if (expected_rate > 0 && int(rate) != expected_rate)
    throw ConfigError("sample rate " + std::to_string(rate) + " != expected " +
                      std::to_string(expected_rate) + " in " + path +
                      " (no resampler)");

  WavData wav;
  wav.sample_rate = int(rate);
  const unsigned char* d = bytes.data() + data_begin;
  if (format == kFormatPcm && bits == 16) {
    const size_t n = data_len / 2;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = int16_t(read_u16(d + 2 * i));
      wav.samples[i] = double(v) / 32768.0;
    }
  } else if (format == kFormatIeeeFloat && bits == 32) {
    const size_t n = data_len / 4;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = read_u32(d + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      wav.samples[i] = double(f);
    }
  } else {
    throw ConfigError("unsupported WAV encoding (format=" +
                      std::to_string(format) + ", bits=" +
                      std::to_string(bits) + ") in " + path);
  }
  return wav;
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format) {
  const bool is_float = format == WavFormat::kFloat32;
  const uint16_t bytes_per = is_float ? 4 : 2;
  const uint32_t data_len = uint32_t(samples.size()) * bytes_per;

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, is_float ? kFormatIeeeFloat : kFormatPcm);
  put_u16(out, 1);  // mono
  put_u32(out, uint32_t(sample_rate));
  put_u32(out, uint32_t(sample_rate) * bytes_per);
  put_u16(out, bytes_per);
  put_u16(out, uint16_t(bytes_per * 8));
  out.append("data");
  put_u32(out, data_len);

  if (is_float) {
    for (double s : samples) {
      float f = float(s);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  } else {
    for (double s : samples) {
      double scaled = std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0;
      put_u16(out, uint16_t(int16_t(std::lrint(scaled))));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write WAV file: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw ConfigError("short write to WAV file: " + path);
}

}  // namespace rcss
