// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace rcss {
namespace {

LogLevel level_from_env() {
  const char* env = std::getenv("RCSS_LOG");
  if (!env) return LogLevel::kInfo;
  if (!std::strcmp(env, "quiet")) return LogLevel::kQuiet;
  if (!std::strcmp(env, "warn")) return LogLevel::kWarn;
  if (!std::strcmp(env, "debug")) return LogLevel::kDebug;
  return LogLevel::kInfo;
}

std::atomic<int>& level_store() {
  static std::atomic<int> level{static_cast<int>(level_from_env())};
  return level;
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_store().load()); }

void set_log_level(LogLevel level) {
  level_store().store(static_cast<int>(level));
}

namespace detail {

LogLine::LogLine(LogLevel level, const char* tag)
    : live_(level <= log_level()) {
  if (live_) stream_ << "[rcss " << tag << "] ";
}

LogLine::~LogLine() {
  if (live_) {
    stream_ << '\n';
    std::fputs(stream_.str().c_str(), stderr);
  }
}

}  // namespace detail
}  // namespace rcss
