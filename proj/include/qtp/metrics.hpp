#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "qtp/engine.hpp"
#include "qtp/error.hpp"

namespace qtp {

// ---------------------------------------------------------------------------
// Fairness

struct FairnessReport {
  double index = 0.0;
  std::vector<double> windows;  // per-session averages, input order
  double trimmed_fraction = 0.0;
  std::size_t used = 0;         // sessions left after trimming
};

/// Jain's index (sum w)^2 / (N sum w^2).
inline double jain(std::span<const double> w) {
  if (w.empty()) throw Error(Errc::undefined_metric, "Jain index of an empty set");
  double sum = 0, sq = 0;
  for (double x : w) {
    if (x < 0) throw Error(Errc::invalid_argument, "Jain index needs non-negative values");
    sum += x;
    sq += x * x;
  }
  if (sq == 0) throw Error(Errc::undefined_metric, "Jain index of all-zero windows");
  return sum * sum / (static_cast<double>(w.size()) * sq);
}

inline double jain(std::initializer_list<double> w) { return jain(std::span<const double>(w.begin(), w.size())); }

/// Jain's index after dropping the largest floor(trim_top * N) values.
inline FairnessReport jain_report(std::vector<double> w, double trim_top = 0.0) {
  if (!(trim_top >= 0.0 && trim_top < 1.0)) throw Error(Errc::invalid_argument, "trim fraction must be in [0, 1)");
  FairnessReport r;
  r.windows = w;
  r.trimmed_fraction = trim_top;
  std::sort(w.begin(), w.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim_top * static_cast<double>(w.size())));
  w.resize(w.size() - drop);
  r.used = w.size();
  r.index = jain(w);
  return r;
}

// ---------------------------------------------------------------------------
// Window series

/// Window a session used in one slot: the granted window, and for a multi-hop
/// TAG session the smallest granted window along its hops.
inline std::map<SessionId, int> slot_windows(const TraceRecord& rec) {
  std::map<SessionId, int> w;
  for (const auto& f : rec.flows) {
    auto [it, fresh] = w.emplace(f.session, f.granted);
    if (!fresh) it->second = std::min(it->second, f.granted);
  }
  return w;
}

inline int effective_window(std::span<const int> hop_windows) {
  if (hop_windows.empty()) throw Error(Errc::undefined_metric, "no hop windows");
  return *std::min_element(hop_windows.begin(), hop_windows.end());
}

/// Per-slot minimum hop window of one session, over the slots it was active.
inline std::vector<int> effective_window(const RunResult& r, SessionId session) {
  std::vector<int> out;
  for (const auto& rec : r.trace) {
    std::vector<int> hops;
    for (const auto& f : rec.flows)
      if (f.session == session) hops.push_back(f.granted);
    if (!hops.empty()) out.push_back(effective_window(hops));
  }
  return out;
}

/// Window series per session (slots where the session was active).
inline std::map<SessionId, std::vector<double>> window_series(const RunResult& r, int from_slot = 0,
                                                              int to_slot = -1) {
  std::map<SessionId, std::vector<double>> out;
  for (const auto& rec : r.trace) {
    if (rec.slot < from_slot || (to_slot >= 0 && rec.slot >= to_slot)) continue;
    for (auto [s, w] : slot_windows(rec)) out[s].push_back(w);
  }
  return out;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::undefined_metric, "mean of an empty series");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Jain's index of per-session mean windows over [from_slot, to_slot).
inline FairnessReport window_fairness(const RunResult& r, int from_slot = 0, int to_slot = -1,
                                      double trim_top = 0.0) {
  std::vector<double> means;
  for (const auto& [_, series] : window_series(r, from_slot, to_slot)) means.push_back(mean(series));
  return jain_report(std::move(means), trim_top);
}

// ---------------------------------------------------------------------------
// Steady state

inline int default_warmup(int n_slots) { return n_slots / 4; }

struct SteadyStats {
  double min = 0;
  double max = 0;
  double mean = 0;
  std::optional<double> period;  // mean spacing of successive peaks
};

/// Statistics over series[warmup:]. A peak is a value followed by a drop.
inline SteadyStats steady_state_stats(std::span<const double> series, std::size_t warmup) {
  if (series.size() <= warmup) throw Error(Errc::undefined_metric, "series shorter than warmup");
  auto tail = series.subspan(warmup);
  SteadyStats s;
  s.min = *std::min_element(tail.begin(), tail.end());
  s.max = *std::max_element(tail.begin(), tail.end());
  s.mean = mean(tail);
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i + 1 < tail.size(); ++i)
    if (tail[i + 1] < tail[i] && (i == 0 || tail[i] >= tail[i - 1])) peaks.push_back(i);
  if (peaks.size() >= 2)
    s.period = static_cast<double>(peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
  return s;
}

// ---------------------------------------------------------------------------
// Memory

inline std::vector<double> utilization(const RunResult& r, NodeId node, PoolKind pool) {
  std::vector<double> out;
  for (const auto& rec : r.trace) {
    bool seen = false;
    for (const auto& p : rec.pools) {
      if (p.node != node || p.pool != pool) continue;
      if (p.capacity == 0) throw Error(Errc::undefined_metric, "utilization of a zero-capacity pool");
      out.push_back(static_cast<double>(p.reserved) / static_cast<double>(p.capacity));
      seen = true;
    }
    if (!seen && !rec.pools.empty())
      throw Error(Errc::undefined_metric, "node " + std::to_string(node.index) + " has no " +
                                              std::string(to_string(pool)) + " pool");
  }
  return out;
}

/// Largest per-slot idle share of a pool after warmup.
inline double idle_fraction(const RunResult& r, NodeId node, PoolKind pool, std::size_t warmup) {
  auto u = utilization(r, node, pool);
  if (u.size() <= warmup) throw Error(Errc::undefined_metric, "no steady-state slots");
  double worst = 0;
  for (std::size_t i = warmup; i < u.size(); ++i) worst = std::max(worst, 1.0 - u[i]);
  return worst;
}

/// Idle bound for N sessions at a bottleneck of window capacity C, with N/C
/// allowance for integer windows.
inline double idle_bound(int n_sessions, std::int64_t capacity) {
  if (n_sessions <= 0 || capacity <= 0) throw Error(Errc::invalid_argument, "need N > 0 and C > 0");
  return 2.0 / (3.0 * n_sessions) + static_cast<double>(n_sessions) / static_cast<double>(capacity);
}

// ---------------------------------------------------------------------------
// Throughput

struct ThroughputReport {
  std::int64_t total = 0;
  double per_slot = 0;
  double per_time = 0;
};

inline ThroughputReport throughput(std::int64_t delivered, int n_slots, double slot_length) {
  if (!(slot_length > 0)) throw Error(Errc::invalid_argument, "slot length must be positive");
  ThroughputReport t;
  t.total = delivered;
  t.per_slot = n_slots > 0 ? static_cast<double>(delivered) / n_slots : 0.0;
  t.per_time = t.per_slot / slot_length;
  return t;
}

inline ThroughputReport throughput(const RunResult& r) {
  std::int64_t egress = 0;
  for (const auto& rec : r.trace)
    for (const auto& f : rec.flows)
      if (f.final_hop()) egress += f.delivered;
  if (egress != r.total_delivered())
    throw Error(Errc::undefined_metric, "trace deliveries disagree with session totals");
  return throughput(egress, r.n_slots, r.slot_length);
}

/// First x where series a and b cross, by linear interpolation between grid
/// points; nothing if they never meet.
inline std::optional<double> crossover(std::span<const double> x, std::span<const double> a,
                                       std::span<const double> b) {
  if (x.size() != a.size() || x.size() != b.size())
    throw Error(Errc::invalid_argument, "crossover series differ in length");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0) return x[i];
    if (i + 1 == x.size()) break;
    const double e = a[i + 1] - b[i + 1];
    if ((d < 0) != (e < 0) && e != 0) return x[i] + (x[i + 1] - x[i]) * d / (d - e);
  }
  return std::nullopt;
}

}  // namespace qtp
