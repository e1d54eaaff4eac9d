// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "rcss/random.hpp"

namespace rcss {
namespace {

using nlohmann::json;

// Wraps json access errors into ConfigError carrying the field name.
template <typename T>
T field(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

SessionSpec parse_session(const json& j, std::uint64_t root_seed,
                          std::size_t index) {
  SessionSpec spec;
  spec.name = field<std::string>(j, "name", "session" + std::to_string(index));
  spec.seed = j.contains("seed")
                  ? field<std::uint64_t>(j, "seed", 0)
                  : (root_seed ^ hash64("session/" + spec.name));
  spec.sample_rate = field<int>(j, "sample_rate", spec.sample_rate);
  spec.duration_s = field<double>(j, "duration_s", spec.duration_s);
  spec.num_speakers = field<int>(j, "num_speakers", spec.num_speakers);
  spec.overlap_ratio = field<double>(j, "overlap_ratio", spec.overlap_ratio);
  spec.utterance_min_s =
      field<double>(j, "utterance_min_s", spec.utterance_min_s);
  spec.utterance_max_s =
      field<double>(j, "utterance_max_s", spec.utterance_max_s);
  spec.gain_min_db = field<double>(j, "gain_min_db", spec.gain_min_db);
  spec.gain_max_db = field<double>(j, "gain_max_db", spec.gain_max_db);
  spec.snr_min_db = field<double>(j, "snr_min_db", spec.snr_min_db);
  spec.snr_max_db = field<double>(j, "snr_max_db", spec.snr_max_db);
  spec.silence_min_s = field<double>(j, "silence_min_s", spec.silence_min_s);
  spec.silence_max_s = field<double>(j, "silence_max_s", spec.silence_max_s);
  spec.hot_spot_count = field<int>(j, "hot_spot_count", spec.hot_spot_count);
  return spec;
}

}  // namespace

std::string condition_label(const SessionSpec& spec) {
  if (spec.overlap_ratio <= 0.0) {
    return spec.silence_max_s > 1.0 ? "0L" : "0S";
  }
  return std::to_string(int(std::lround(spec.overlap_ratio * 100.0)));
}

CssConfig RunConfig::css() const {
  CssConfig cfg;
  cfg.stft = stft;
  cfg.window = window_from_seconds(block_s, hop_s, stft, channels, dependency);
  cfg.workers = workers;
  return cfg;
}

void RunConfig::validate() const {
  if (output_dir.empty()) {
    throw ConfigError("output_dir must not be empty");
  }
  stop.validate();
  css().validate();  // window geometry, workers vs dependency
  const std::set<std::string> known = {"oracle", "leaky_oracle", "upit",
                                       "toy"};
  if (!known.count(estimator.name)) {
    throw ConfigError("estimator.name '" + estimator.name +
                      "' unknown (oracle, leaky_oracle, upit, toy)");
  }
  if (estimator.name == "upit" && dependency) {
    throw ConfigError(
        "estimator.name 'upit' has no recursion to carry dependency across "
        "blocks; set window.dependency to false");
  }
  if (!(estimator.activity_threshold > 0.0 &&
        estimator.activity_threshold < 1.0)) {
    throw ConfigError("estimator.activity_threshold must lie in (0, 1)");
  }
  if (estimator.leak < 0.0 || estimator.leak > 0.5) {
    throw ConfigError("estimator.leak must lie in [0, 0.5]");
  }
  std::set<std::string> names;
  for (const auto& spec : sessions) {
    spec.validate();
    if (spec.sample_rate != stft.sample_rate) {
      throw ConfigError("session '" + spec.name +
                        "': sample_rate differs from stft.sample_rate");
    }
    if (!names.insert(spec.name).second) {
      throw ConfigError("duplicate session name '" + spec.name + "'");
    }
  }
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
  cfg.output_dir = field<std::string>(j, "output_dir", cfg.output_dir);
  cfg.workers = field<int>(j, "workers", cfg.workers);

  if (j.contains("stft")) {
    const json& s = j.at("stft");
    cfg.stft.sample_rate = field<int>(s, "sample_rate", cfg.stft.sample_rate);
    cfg.stft.frame_len = field<int>(s, "frame", cfg.stft.frame_len);
    cfg.stft.hop_len = field<int>(s, "hop", cfg.stft.hop_len);
  }
  if (j.contains("window")) {
    const json& w = j.at("window");
    cfg.block_s = field<double>(w, "block_s", cfg.block_s);
    cfg.hop_s = field<double>(w, "hop_s", cfg.hop_s);
    cfg.channels = field<int>(w, "channels", cfg.channels);
    cfg.dependency = field<bool>(w, "dependency", cfg.dependency);
  }
  if (j.contains("stop")) {
    const json& s = j.at("stop");
    cfg.stop.thresholds =
        field<std::vector<double>>(s, "thresholds", cfg.stop.thresholds);
    cfg.stop.max_iterations =
        field<int>(s, "max_iterations", cfg.stop.max_iterations);
  }
  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    cfg.estimator.name = field<std::string>(e, "name", cfg.estimator.name);
    cfg.estimator.activity_threshold = field<double>(
        e, "activity_threshold", cfg.estimator.activity_threshold);
    cfg.estimator.leak = field<double>(e, "leak", cfg.estimator.leak);
    cfg.estimator.toy_seed =
        field<std::uint64_t>(e, "toy_seed", cfg.estimator.toy_seed);
  }
  if (j.contains("sessions")) {
    if (!j.at("sessions").is_array()) {
      throw ConfigError("config field 'sessions': expected an array");
    }
    std::size_t index = 0;
    for (const auto& s : j.at("sessions")) {
      SessionSpec spec = parse_session(s, cfg.seed, index++);
      if (!s.contains("sample_rate")) {
        spec.sample_rate = cfg.stft.sample_rate;
      }
      cfg.conditions.push_back(
          s.contains("condition")
              ? field<std::string>(s, "condition", "")
              : condition_label(spec));
      cfg.sessions.push_back(std::move(spec));
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      e.what());
  }
}

std::string resolve_knob(const std::string& name) {
  if (!name.empty() && name.front() == '/') return name;
  if (name == "threshold" || name == "thresholds") return "/stop/thresholds";
  if (name == "max_iterations") return "/stop/max_iterations";
  if (name == "dependency") return "/window/dependency";
  if (name == "block_s" || name == "block") return "/window/block_s";
  if (name == "hop_s" || name == "hop") return "/window/hop_s";
  if (name == "channels") return "/window/channels";
  if (name == "estimator") return "/estimator/name";
  if (name == "leak") return "/estimator/leak";
  if (name == "workers") return "/workers";
  if (name == "seed") return "/seed";
  throw ConfigError(
      "unknown parameter '" + name +
      "' (use a /json/pointer or one of: threshold, max_iterations, "
      "dependency, block_s, hop_s, channels, estimator, leak, workers, "
      "seed)");
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment +
                      "' must look like key=value");
  }
  const std::string key = resolve_knob(assignment.substr(0, eq));
  const std::string literal = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(literal);
  } catch (const json::exception&) {
    value = literal;  // unquoted strings (estimator names, paths)
  }
  try {
    j[json::json_pointer(key)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

}  // namespace rcss
