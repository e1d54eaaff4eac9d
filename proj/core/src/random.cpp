// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/random.hpp"

namespace rcss {

uint64_t hash64(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::mt19937_64 substream(uint64_t root_seed, std::string_view name) {
  const uint64_t h = hash64(name);
  std::seed_seq seq{static_cast<uint32_t>(root_seed),
                    static_cast<uint32_t>(root_seed >> 32),
                    static_cast<uint32_t>(h),
                    static_cast<uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace rcss
