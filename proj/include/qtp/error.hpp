#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qtp {

enum class Errc {
  invalid_argument,
  generation_failure,
  no_route,
  infeasible_reservation,
  capacity_exceeded,
  deadlock_detected,
  undefined_metric,
  config_error,
  io_error,
  unknown_preset,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::generation_failure: return "generation-failure";
    case Errc::no_route: return "no-route";
    case Errc::infeasible_reservation: return "infeasible-reservation";
    case Errc::capacity_exceeded: return "capacity-exceeded";
    case Errc::deadlock_detected: return "deadlock-detected";
    case Errc::undefined_metric: return "undefined-metric";
    case Errc::config_error: return "config-error";
    case Errc::io_error: return "io-error";
    case Errc::unknown_preset: return "unknown-preset";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can emit a machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qtp
