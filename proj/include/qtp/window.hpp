#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>

#include "qtp/error.hpp"

namespace qtp {

enum class Phase { SlowStart, CongestionAvoidance };

constexpr std::string_view to_string(Phase p) { return p == Phase::SlowStart ? "SS" : "CA"; }

inline Phase phase_from_string(std::string_view s) {
  if (s == "SS") return Phase::SlowStart;
  if (s == "CA") return Phase::CongestionAvoidance;
  throw Error(Errc::invalid_argument, "unknown phase '" + std::string(s) + "'");
}

/// Window actually usable this slot.
constexpr int granted_window(int announced, bool ce) { return ce ? announced / 2 : announced; }

struct WindowState {
  int window = 1;
  Phase phase = Phase::SlowStart;
};

/// Sending-window control step shared by both protocols: a CE halves the
/// window and pins the phase to CA, then the window doubles (SS) or grows by
/// one (CA). The result never drops below 1 and never exceeds `cap`.
constexpr WindowState next_window(WindowState s, bool ce, std::optional<int> cap = std::nullopt) {
  if (ce) {
    s.window /= 2;
    s.phase = Phase::CongestionAvoidance;
  }
  s.window = s.phase == Phase::SlowStart ? s.window * 2 : s.window + 1;
  s.window = std::max(s.window, 1);
  if (cap) s.window = std::min(s.window, std::max(*cap, 1));
  return s;
}

}  // namespace qtp
