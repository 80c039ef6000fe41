#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wqed {

/// Failure categories. Each maps onto one CLI exit code (see exit_code()).
enum class ErrorKind {
  config,            // invalid parameters or configuration
  range,             // time or index outside the simulated grid
  truncation,        // pulse not contained in the grid or window
  integration,       // step size too coarse for the dynamics
  undefined,         // decomposition of an all-zero map
  identifiability,   // degenerate fit design
  fit_failure,       // least squares did not converge
  extrapolation,     // requested crossing not reached by the fitted curve
  clock_gap,         // too many consecutive clock ticks missing
  stream_corruption, // non-monotone timestamps
  io,                // unreadable / unwritable files, malformed payloads
};

std::string_view to_string(ErrorKind kind) noexcept;

/// 2 = configuration error, 3 = data error, 4 = numerical failure.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace wqed
