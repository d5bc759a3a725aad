#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qtp/error.hpp"
#include "qtp/topology.hpp"

namespace qtp {

using SessionId = std::uint32_t;

/// A reservation holder: an end-to-end session, or one hop of it under TAG
/// relaying. Tele sessions always use hop 0.
struct FlowKey {
  SessionId session = 0;
  std::uint16_t hop = 0;

  constexpr auto operator<=>(const FlowKey&) const = default;
};

struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  /// ceil(this * w) for w >= 0.
  constexpr std::int64_t ceil_mul(std::int64_t w) const { return (num * w + den - 1) / den; }
  /// floor(this * w) for w >= 0.
  constexpr std::int64_t floor_mul(std::int64_t w) const { return (num * w) / den; }

  constexpr bool operator==(const Rational& o) const { return num * o.den == o.num * den; }
};

/// Memory units per unit of window.
namespace factor {
inline constexpr Rational receive{1, 1};
inline constexpr Rational tele_send{2, 1};  // ingress and transit repeaters
inline constexpr Rational tag_send{9, 4};
}  // namespace factor

struct PartitionScheme {
  Rational send_fraction;

  constexpr Rational receive_fraction() const {
    return Rational{send_fraction.den - send_fraction.num, send_fraction.den};
  }
};

inline constexpr PartitionScheme kTelePartition{{2, 3}};
inline constexpr PartitionScheme kTagPartition{{9, 13}};

/// (send pool, receive pool); send gets the floor.
constexpr std::pair<int, int> partition(int total, PartitionScheme scheme) {
  if (total < 0) throw Error(Errc::invalid_argument, "capacity must be non-negative");
  int send = static_cast<int>(scheme.send_fraction.floor_mul(total));
  return {send, total - send};
}

struct Demand {
  FlowKey flow;
  int window = 1;
  Rational factor = factor::receive;
  int floor_units = 0;  // units already occupied that cannot be evicted

  std::int64_t cost(int w) const { return std::max<std::int64_t>(factor.ceil_mul(w), floor_units); }
};

struct Grant {
  FlowKey flow;
  int window = 0;
  bool ce = false;
  std::int64_t units = 0;
};

/// Quantum memory assignment at one pool.
///
/// Demands are visited in descending window order (ties: smaller flow first).
/// If the total cost fits, everyone gets a full grant. Otherwise sessions are
/// halved in that order, each cut lowering the remaining total by the units it
/// actually frees, until the rest fits. Results are aligned with the input.
inline std::vector<Grant> qma(std::span<const Demand> demands, std::int64_t capacity) {
  std::vector<Grant> out(demands.size());
  std::vector<std::size_t> order(demands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (demands[a].window != demands[b].window) return demands[a].window > demands[b].window;
    return demands[a].flow < demands[b].flow;
  });

  std::int64_t floors = 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < demands.size(); ++i) {
    const auto& d = demands[i];
    if (d.window < 0) throw Error(Errc::invalid_argument, "negative window demand");
    floors += d.floor_units;
    total += d.cost(d.window);
    out[i] = Grant{d.flow, d.window, false, d.cost(d.window)};
  }
  if (floors > capacity)
    throw Error(Errc::deadlock_detected, "held units " + std::to_string(floors) +
                                             " exceed pool capacity " + std::to_string(capacity));

  for (std::size_t k = 0; k < order.size() && total > capacity; ++k) {
    const std::size_t i = order[k];
    const auto& d = demands[i];
    const int halved = d.window / 2;
    total -= d.cost(d.window) - d.cost(halved);
    out[i].window = halved;
    out[i].ce = true;
    out[i].units = d.cost(halved);
  }
  if (total > capacity)
    throw Error(Errc::infeasible_reservation, "demand " + std::to_string(total) +
                                                  " exceeds capacity " + std::to_string(capacity) +
                                                  " after halving every session");
  return out;
}

/// One node-local pool of quantum memory. Reservations are keyed by flow and
/// cleared by the engine at the end of every slot.
class MemoryPool {
 public:
  MemoryPool() = default;
  explicit MemoryPool(std::int64_t capacity) : capacity_(capacity) {
    if (capacity < 0) throw Error(Errc::invalid_argument, "pool capacity must be non-negative");
  }

  std::int64_t capacity() const { return capacity_; }
  std::int64_t reserved() const { return reserved_; }
  std::int64_t free() const { return capacity_ - reserved_; }

  std::int64_t reserved_by(FlowKey f) const {
    auto it = by_flow_.find(f);
    return it == by_flow_.end() ? 0 : it->second;
  }

  void reserve(FlowKey f, std::int64_t units) {
    if (units < 0) throw Error(Errc::invalid_argument, "negative reservation");
    if (units > free())
      throw Error(Errc::capacity_exceeded, "reserving " + std::to_string(units) + " with " +
                                               std::to_string(free()) + " free of " +
                                               std::to_string(capacity_));
    if (units == 0) return;
    by_flow_[f] += units;
    reserved_ += units;
  }

  /// Releases up to `units` held by f; returns what was actually released.
  std::int64_t release(FlowKey f, std::int64_t units) {
    auto it = by_flow_.find(f);
    if (it == by_flow_.end() || units <= 0) return 0;
    std::int64_t r = std::min(units, it->second);
    it->second -= r;
    reserved_ -= r;
    if (it->second == 0) by_flow_.erase(it);
    return r;
  }

  void clear() {
    by_flow_.clear();
    reserved_ = 0;
  }

 private:
  std::int64_t capacity_ = 0;
  std::int64_t reserved_ = 0;
  std::map<FlowKey, std::int64_t> by_flow_;
};

enum class PoolKind { Send, Receive, Transit };

constexpr std::string_view to_string(PoolKind k) {
  switch (k) {
    case PoolKind::Send: return "send";
    case PoolKind::Receive: return "receive";
    case PoolKind::Transit: return "transit";
  }
  return "?";
}

struct PoolRef {
  NodeId node;
  PoolKind kind = PoolKind::Transit;

  constexpr auto operator<=>(const PoolRef&) const = default;
};

/// All pools of a topology, laid out by network type:
///   Tele-QDN: hosts split 2/3 send, 1/3 receive; repeaters one transit pool.
///   TAG-QDN-S: hosts split 9/13 send, 4/13 receive; switches hold nothing.
///   TAG-QDN-R: hosts and relays split 9/13 : 4/13.
/// A node's explicit PoolSplit overrides the rule.
class PoolSet {
 public:
  PoolSet() = default;

  explicit PoolSet(const Topology& t) {
    const PartitionScheme scheme = t.kind == NetworkKind::TeleQDN ? kTelePartition : kTagPartition;
    for (const auto& n : t.nodes) {
      if (n.split) {
        add({n.id, PoolKind::Send}, n.split->send);
        add({n.id, PoolKind::Receive}, n.split->receive);
        continue;
      }
      const bool split = n.kind == NodeKind::Host ||
                         (t.kind == NetworkKind::TagQdnR && n.kind != NodeKind::Switch);
      if (n.kind == NodeKind::Switch) continue;
      if (split) {
        auto [send, recv] = partition(n.memory_capacity, scheme);
        add({n.id, PoolKind::Send}, send);
        add({n.id, PoolKind::Receive}, recv);
      } else {
        add({n.id, PoolKind::Transit}, n.memory_capacity);
      }
    }
  }

  bool has(PoolRef r) const { return pools_.count(r) != 0; }

  MemoryPool& at(PoolRef r) {
    auto it = pools_.find(r);
    if (it == pools_.end())
      throw Error(Errc::invalid_argument, "node " + std::to_string(r.node.index) + " has no " +
                                              std::string(to_string(r.kind)) + " pool");
    return it->second;
  }
  const MemoryPool& at(PoolRef r) const { return const_cast<PoolSet*>(this)->at(r); }

  /// Capacity of a pool, 0 when the node has none.
  std::int64_t capacity(PoolRef r) const {
    auto it = pools_.find(r);
    return it == pools_.end() ? 0 : it->second.capacity();
  }

  void clear_all() {
    for (auto& [_, p] : pools_) p.clear();
  }

  const std::map<PoolRef, MemoryPool>& pools() const { return pools_; }

 private:
  void add(PoolRef r, std::int64_t cap) { pools_.emplace(r, MemoryPool(cap)); }

  std::map<PoolRef, MemoryPool> pools_;
};

}  // namespace qtp
