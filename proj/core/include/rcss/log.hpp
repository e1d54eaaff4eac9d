// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <sstream>

namespace rcss {

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Initial level comes from the RCSS_LOG environment variable
// (quiet|warn|info|debug), default info.
LogLevel log_level();
void set_log_level(LogLevel level);

namespace detail {

class LogLine {
 public:
  LogLine(LogLevel level, const char* tag);
  ~LogLine();
  template <typename T>
  LogLine& operator<<(const T& value) {
    if (live_) stream_ << value;
    return *this;
  }

 private:
  bool live_;
  std::ostringstream stream_;
};

}  // namespace detail
}  // namespace rcss

#define RCSS_WARN ::rcss::detail::LogLine(::rcss::LogLevel::kWarn, "W")
#define RCSS_INFO ::rcss::detail::LogLine(::rcss::LogLevel::kInfo, "I")
#define RCSS_DEBUG ::rcss::detail::LogLine(::rcss::LogLevel::kDebug, "D")
