// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rcss/config.hpp"
#include "rcss/metrics.hpp"

namespace rcss {

// Commands throw ConfigError for bad configs or missing artifacts and other
// exceptions for internal failures; the CLI maps those to exit codes.
void cmd_generate(const RunConfig& cfg);
void cmd_separate(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg, const std::string& compare_dir = "");
void cmd_sweep(const nlohmann::json& base_config, const std::string& parameter,
               const std::vector<std::string>& values);

// Artifact layout under cfg.output_dir.
std::string session_dir(const RunConfig& cfg, const SessionSpec& spec);
std::string separated_dir(const RunConfig& cfg, const SessionSpec& spec);

void write_session(const std::string& dir, const SessionTruth& truth,
                   const SessionSpec& spec, const std::string& condition);

struct LoadedSession {
  SessionTruth truth;
  std::string condition;
};
LoadedSession load_session(const std::string& dir, int expected_rate);

std::unique_ptr<SeparatorBackend> make_backend(const RunConfig& cfg);

// Separation + scoring for every configured session, reading the artifacts
// generate/separate left behind.
EvalReport evaluate_sessions(const RunConfig& cfg);

}  // namespace rcss
