#pragma once

#include <iostream>
#include <sstream>

namespace assign {

// Level comes from the ASSIGN_LOG env var: error (default), info, debug.
enum class LogLevel : int { error = 0, info = 1, debug = 2 };

LogLevel log_level();

namespace detail {
void log_line(LogLevel level, const std::string& msg);
}

template <typename... Args>
void log_info(Args&&... args) {
  if (log_level() < LogLevel::info) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::info, os.str());
}

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_level() < LogLevel::debug) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::debug, os.str());
}

template <typename... Args>
void log_error(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::error, os.str());
}

}  // namespace assign
