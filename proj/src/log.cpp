#include "assign/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace assign {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ASSIGN_LOG");
    if (!env) return LogLevel::error;
    std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

namespace detail {

void log_line(LogLevel level, const std::string& msg) {
  static std::mutex mu;
  const char* tag = level == LogLevel::debug  ? "debug"
                    : level == LogLevel::info ? "info"
                                              : "error";
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[" << tag << "] " << msg << "\n";
}

}  // namespace detail

}  // namespace assign
