#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qtp/memory.hpp"
#include "qtp/routing.hpp"
#include "qtp/window.hpp"

namespace qtp {

/// One Tele-QTP flow. `remaining == nullopt` means an unbounded backlog.
struct TeleSession {
  SessionId id = 0;
  NodeId src;
  NodeId dst;
  Path path;
  int window = 1;
  Phase phase = Phase::SlowStart;
  std::optional<std::int64_t> remaining;
  std::optional<int> window_cap;
  int granted = 0;
  bool ce = false;
  std::int64_t delivered_total = 0;

  bool active() const { return !remaining || *remaining > 0; }
  FlowKey flow() const { return FlowKey{id, 0}; }
};

struct ReservationOutcome {
  SessionId session = 0;
  int announced = 0;
  bool ce = false;
  int granted = 0;
};

/// Window announced along the path, or nothing once the backlog is empty.
inline std::optional<int> swc_announce(const TeleSession& s) {
  if (!s.active()) return std::nullopt;
  return s.window;
}

/// End-of-slot window control: the backlog shrinks by what was delivered, then
/// the next window follows the CE halving and SS/CA growth rules.
inline void swc_update(TeleSession& s, bool ce, std::int64_t delivered) {
  if (delivered < 0) throw Error(Errc::invalid_argument, "negative delivery count");
  if (s.remaining) *s.remaining = std::max<std::int64_t>(0, *s.remaining - delivered);
  auto next = next_window({s.window, s.phase}, ce, s.window_cap);
  s.window = next.window;
  s.phase = next.phase;
}

/// Delivers min(granted, remaining) qubits over the established circuits.
inline std::int64_t teleport_transfer(TeleSession& s) {
  std::int64_t delivered = s.granted;
  if (s.remaining) delivered = std::min<std::int64_t>(delivered, *s.remaining);
  s.delivered_total += delivered;
  return delivered;
}

struct PathRole {
  PoolRef pool;
  Rational factor;
};

/// Pools a Tele session touches: ingress send pool (2 units per circuit),
/// every repeater's transit pool (2 units), egress receive pool (1 unit).
inline std::vector<PathRole> tele_roles(const Path& p, const PoolSet& pools) {
  std::vector<PathRole> roles;
  if (p.nodes.size() < 2) return roles;
  roles.push_back({{p.nodes.front(), PoolKind::Send}, factor::tele_send});
  for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i) {
    PoolRef transit{p.nodes[i], PoolKind::Transit};
    // Memoryless nodes (switches) take no part in reservation.
    if (pools.has(transit)) roles.push_back({transit, factor::tele_send});
  }
  roles.push_back({{p.nodes.back(), PoolKind::Receive}, factor::receive});
  return roles;
}

namespace detail {

inline void place_tele_reservations(std::span<TeleSession* const> sessions, PoolSet& pools) {
  for (TeleSession* s : sessions)
    for (const auto& r : tele_roles(s->path, pools))
      pools.at(r.pool).reserve(s->flow(), r.factor.ceil_mul(s->granted));
}

inline std::vector<ReservationOutcome> outcomes(std::span<TeleSession* const> sessions,
                                                const std::vector<int>& announced) {
  std::vector<ReservationOutcome> out;
  out.reserve(sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i)
    out.push_back({sessions[i]->id, announced[i], sessions[i]->ce, sessions[i]->granted});
  return out;
}

// Sessions crossing each pool, in the order given.
inline std::map<PoolRef, std::vector<std::pair<std::size_t, Rational>>> sessions_by_pool(
    std::span<TeleSession* const> sessions, const PoolSet& pools) {
  std::map<PoolRef, std::vector<std::pair<std::size_t, Rational>>> by_pool;
  for (std::size_t i = 0; i < sessions.size(); ++i)
    for (const auto& r : tele_roles(sessions[i]->path, pools)) by_pool[r.pool].emplace_back(i, r.factor);
  return by_pool;
}

}  // namespace detail

/// Tele-QTP reservation for one slot.
///
/// Pass 1: every pool runs QMA over the announced windows of the sessions
/// crossing it and marks CE independently. Pass 2: a session's CE is the OR of
/// its marks, its grant is W or floor(W/2), and that grant is reserved at every
/// node on the path. `sessions` must hold active sessions only.
inline std::vector<ReservationOutcome> reserve_slot_qtp(std::span<TeleSession* const> sessions,
                                                        PoolSet& pools) {
  std::vector<int> announced(sessions.size());
  std::vector<char> ce(sessions.size(), 0);
  for (std::size_t i = 0; i < sessions.size(); ++i) announced[i] = sessions[i]->window;

  for (const auto& [ref, members] : detail::sessions_by_pool(sessions, pools)) {
    std::vector<Demand> demands;
    demands.reserve(members.size());
    for (auto [i, a] : members) demands.push_back(Demand{sessions[i]->flow(), announced[i], a, 0});
    auto grants = qma(demands, pools.at(ref).capacity());
    for (std::size_t k = 0; k < members.size(); ++k)
      if (grants[k].ce) ce[members[k].first] = 1;
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i]->ce = ce[i] != 0;
    sessions[i]->granted = granted_window(announced[i], sessions[i]->ce);
  }
  detail::place_tele_reservations(sessions, pools);
  return detail::outcomes(sessions, announced);
}

/// Window a pool can carry per slot: floor(capacity / units-per-circuit).
inline std::int64_t pool_window_capacity(const PoolSet& pools, PoolRef ref, Rational a) {
  return pools.capacity(ref) * a.den / a.num;
}

/// Explicit Window: every pool hands each of its N sessions floor(C/N); a
/// session uses the smallest share on its path. Requested windows are ignored.
inline std::vector<ReservationOutcome> reserve_slot_ew(std::span<TeleSession* const> sessions,
                                                       PoolSet& pools) {
  std::vector<int> share(sessions.size(), std::numeric_limits<int>::max());
  for (const auto& [ref, members] : detail::sessions_by_pool(sessions, pools)) {
    for (auto [i, a] : members) {
      auto fair = pool_window_capacity(pools, ref, a) / static_cast<std::int64_t>(members.size());
      share[i] = std::min<int>(share[i], static_cast<int>(fair));
    }
  }
  std::vector<int> announced(sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i]->ce = false;
    sessions[i]->granted = share[i] == std::numeric_limits<int>::max() ? 0 : share[i];
    announced[i] = sessions[i]->granted;
  }
  detail::place_tele_reservations(sessions, pools);
  return detail::outcomes(sessions, announced);
}

/// Fair Resource Allocation: a pool marks CE when the announced window exceeds
/// its fair share floor(C/N); window control then proceeds as in Tele-QTP.
inline std::vector<ReservationOutcome> reserve_slot_fra(std::span<TeleSession* const> sessions,
                                                        PoolSet& pools) {
  std::vector<int> announced(sessions.size());
  std::vector<char> ce(sessions.size(), 0);
  for (std::size_t i = 0; i < sessions.size(); ++i) announced[i] = sessions[i]->window;
  for (const auto& [ref, members] : detail::sessions_by_pool(sessions, pools)) {
    for (auto [i, a] : members) {
      auto fair = pool_window_capacity(pools, ref, a) / static_cast<std::int64_t>(members.size());
      if (announced[i] > fair) ce[i] = 1;
    }
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i]->ce = ce[i] != 0;
    sessions[i]->granted = granted_window(announced[i], sessions[i]->ce);
  }
  detail::place_tele_reservations(sessions, pools);
  return detail::outcomes(sessions, announced);
}

}  // namespace qtp
