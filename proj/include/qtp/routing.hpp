#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qtp/error.hpp"
#include "qtp/topology.hpp"

namespace qtp {

struct Path {
  NodeId src;
  NodeId dst;
  std::vector<NodeId> nodes;  // src ... dst

  std::size_t hop_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

/// Path minus its endpoints.
inline std::vector<NodeId> nodes_between(const Path& p) {
  if (p.nodes.size() <= 2) return {};
  return {p.nodes.begin() + 1, p.nodes.end() - 1};
}

inline bool is_valid_path(const Topology& t, const Path& p) {
  if (p.nodes.size() < 2 || p.nodes.front() != p.src || p.nodes.back() != p.dst) return false;
  auto adj = t.adjacency();
  std::vector<NodeId> sorted = p.nodes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
    if (p.nodes[i].index >= t.size()) return false;
    const auto& nb = adj[p.nodes[i].index];
    if (!std::binary_search(nb.begin(), nb.end(), p.nodes[i + 1])) return false;
  }
  return true;
}

inline constexpr double kDefaultRouteLambda = 4.0;

namespace detail {

struct RouteLabel {
  double cost = 0.0;
  std::vector<NodeId> seq;

  // Cost first (with a small tolerance for float summation order), then hop
  // count, then lexicographic node sequence.
  bool better_than(const RouteLabel& o) const {
    if (std::abs(cost - o.cost) > 1e-9) return cost < o.cost;
    if (seq.size() != o.seq.size()) return seq.size() < o.seq.size();
    return seq < o.seq;
  }
};

}  // namespace detail

/// Minimum-cost path with edge cost 1 + lambda * load[entered node].
/// `load` is the reserved fraction per node; an empty span means no load.
inline Path compute_path(const Topology& t, NodeId src, NodeId dst, std::span<const double> load = {},
                         double lambda = kDefaultRouteLambda,
                         const std::vector<std::vector<NodeId>>* adjacency = nullptr) {
  if (src == dst) throw Error(Errc::invalid_argument, "route endpoints must differ");
  if (src.index >= t.size() || dst.index >= t.size())
    throw Error(Errc::invalid_argument, "route endpoint not in topology");
  if (!t.is_host(src) || !t.is_host(dst))
    throw Error(Errc::invalid_argument, "route endpoints must be hosts");

  std::vector<std::vector<NodeId>> local;
  if (!adjacency) {
    local = t.adjacency();
    adjacency = &local;
  }
  auto load_of = [&](NodeId v) {
    return v.index < load.size() ? std::clamp(load[v.index], 0.0, 1.0) : 0.0;
  };

  const std::size_t n = t.size();
  std::vector<std::optional<detail::RouteLabel>> best(n);
  std::vector<char> done(n, 0);
  best[src.index] = detail::RouteLabel{0.0, {src}};

  // n is small (hundreds), so a linear scan for the next label keeps the
  // tie-breaking exact without a heap of vectors.
  for (;;) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && best[i] && (u == n || best[i]->better_than(*best[u]))) u = i;
    if (u == n) break;
    done[u] = 1;
    if (u == dst.index) break;
    // Hosts other than the source never relay.
    if (u != src.index && t.nodes[u].kind == NodeKind::Host) continue;
    for (NodeId v : (*adjacency)[u]) {
      if (done[v.index]) continue;
      detail::RouteLabel cand{best[u]->cost + 1.0 + lambda * load_of(v), best[u]->seq};
      cand.seq.push_back(v);
      if (!best[v.index] || cand.better_than(*best[v.index])) best[v.index] = std::move(cand);
    }
  }
  if (!best[dst.index])
    throw Error(Errc::no_route, "no route from " + std::to_string(src.index) + " to " +
                                    std::to_string(dst.index));
  return Path{src, dst, std::move(best[dst.index]->seq)};
}

}  // namespace qtp
