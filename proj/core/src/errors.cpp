#include "wqed/errors.hpp"

namespace wqed {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::range: return "range";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::integration: return "integration";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::identifiability: return "identifiability";
    case ErrorKind::fit_failure: return "fit_failure";
    case ErrorKind::extrapolation: return "extrapolation";
    case ErrorKind::clock_gap: return "clock_gap";
    case ErrorKind::stream_corruption: return "stream_corruption";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::range:
    case ErrorKind::truncation:
    case ErrorKind::clock_gap:
    case ErrorKind::stream_corruption:
    case ErrorKind::io:
      return 3;
    case ErrorKind::integration:
    case ErrorKind::undefined:
    case ErrorKind::identifiability:
    case ErrorKind::fit_failure:
    case ErrorKind::extrapolation:
      return 4;
  }
  return 4;
}

}  // namespace wqed
