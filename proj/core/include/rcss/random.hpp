// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rcss {

// 64-bit FNV-1a.
uint64_t hash64(std::string_view text);

// Generator for the named sub-stream of a root seed. Draws from one stream
// never perturb another, so adding a parameter does not shift unrelated
// random values.
std::mt19937_64 substream(uint64_t root_seed, std::string_view name);

double uniform(std::mt19937_64& rng, double lo, double hi);

}  // namespace rcss
