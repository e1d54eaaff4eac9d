// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcss/css.hpp"
#include "rcss/rsan.hpp"
#include "rcss/simulator.hpp"

namespace rcss {

struct EstimatorConfig {
  std::string name = "oracle";  // oracle | leaky_oracle | upit | toy
  double activity_threshold = kDefaultActivityThreshold;
  double leak = 0.0;
  std::uint64_t toy_seed = 7;
};

// Everything an experiment needs, parsed from one JSON file. The file is the
// single source of truth; the command line only picks the config, the
// subcommand and scalar overrides.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int workers = 1;
  StftConfig stft;
  double block_s = 2.4;
  double hop_s = 0.8;
  int channels = 2;
  bool dependency = false;
  StopPolicy stop;
  EstimatorConfig estimator;
  std::vector<SessionSpec> sessions;
  std::vector<std::string> conditions;  // parallel to sessions

  CssConfig css() const;
  void validate() const;  // throws ConfigError
};

// Throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& j);

nlohmann::json load_config_json(const std::string& path);

// Applies "pointer=json-literal" (e.g. /window/channels=3). A bare word
// before '=' is looked up in a table of common knobs. The literal falls back
// to a plain string when it does not parse as JSON.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Pointer for a sweep/override shorthand name; throws ConfigError for
// unknown names.
std::string resolve_knob(const std::string& name);

// Session stratification label: "0S"/"0L" for no overlap with short/long
// silences, otherwise the overlap percentage.
std::string condition_label(const SessionSpec& spec);

}  // namespace rcss
