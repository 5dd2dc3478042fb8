#pragma once

#include <stdexcept>
#include <string>

namespace gnss_sentry {

enum class ErrorCode {
  invalid_input = 1,
  io = 2,
  format = 3,
  degenerate_feature = 4,
  version_mismatch = 5,
};

// Single exception type for all library errors; the code selects the
// category the C API reports, the message carries the detail (line
// number, feature name, version pair).
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(std::string message) {
  throw Error(ErrorCode::invalid_input, std::move(message));
}

[[noreturn]] inline void throw_format(std::string message) {
  throw Error(ErrorCode::format, std::move(message));
}

[[noreturn]] inline void throw_io(std::string message) {
  throw Error(ErrorCode::io, std::move(message));
}

}  // namespace gnss_sentry
