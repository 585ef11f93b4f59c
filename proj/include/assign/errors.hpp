#pragma once

#include <stdexcept>
#include <string>

namespace assign {

// All recoverable failures carry a stable machine-parsable code alongside the
// human message. The CLI prints them as "error: <code>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace assign
