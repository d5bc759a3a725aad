#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qtp/error.hpp"
#include "qtp/rng.hpp"

namespace qtp {

struct NodeId {
  std::uint32_t index = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
};

enum class NodeKind { Repeater, Relay, Switch, Host };
enum class NetworkKind { TeleQDN, TagQdnR, TagQdnS };

constexpr std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Repeater: return "Repeater";
    case NodeKind::Relay: return "Relay";
    case NodeKind::Switch: return "Switch";
    case NodeKind::Host: return "Host";
  }
  return "?";
}

constexpr std::string_view to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::TeleQDN: return "TeleQDN";
    case NetworkKind::TagQdnR: return "TagQdnR";
    case NetworkKind::TagQdnS: return "TagQdnS";
  }
  return "?";
}

inline NodeKind node_kind_from_string(std::string_view s) {
  for (auto k : {NodeKind::Repeater, NodeKind::Relay, NodeKind::Switch, NodeKind::Host})
    if (to_string(k) == s) return k;
  throw Error(Errc::invalid_argument, "unknown node kind '" + std::string(s) + "'");
}

inline NetworkKind network_kind_from_string(std::string_view s) {
  for (auto k : {NetworkKind::TeleQDN, NetworkKind::TagQdnR, NetworkKind::TagQdnS})
    if (to_string(k) == s) return k;
  throw Error(Errc::invalid_argument, "unknown network kind '" + std::string(s) + "'");
}

/// Infrastructure node kind used by each network type.
constexpr NodeKind infra_kind(NetworkKind k) {
  switch (k) {
    case NetworkKind::TeleQDN: return NodeKind::Repeater;
    case NetworkKind::TagQdnR: return NodeKind::Relay;
    case NetworkKind::TagQdnS: return NodeKind::Switch;
  }
  return NodeKind::Repeater;
}

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Explicit send/receive pool sizes; overrides the network's partition rule.
struct PoolSplit {
  int send = 0;
  int receive = 0;
};

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Repeater;
  Position position;
  int memory_capacity = 0;
  std::optional<PoolSplit> split;
};

struct Topology {
  NetworkKind kind = NetworkKind::TeleQDN;
  std::vector<Node> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;

  std::size_t size() const { return nodes.size(); }
  const Node& node(NodeId id) const { return nodes.at(id.index); }
  bool is_host(NodeId id) const { return node(id).kind == NodeKind::Host; }

  NodeId add_node(NodeKind kind, Position pos, int capacity) {
    NodeId id{static_cast<std::uint32_t>(nodes.size())};
    nodes.push_back(Node{id, kind, pos, capacity, std::nullopt});
    return id;
  }

  void add_edge(NodeId a, NodeId b) { edges.emplace_back(std::min(a, b), std::max(a, b)); }

  /// Sorted neighbour lists.
  std::vector<std::vector<NodeId>> adjacency() const {
    std::vector<std::vector<NodeId>> adj(nodes.size());
    for (auto [a, b] : edges) {
      if (a.index >= nodes.size() || b.index >= nodes.size())
        throw Error(Errc::invalid_argument, "edge references unknown node");
      adj[a.index].push_back(b);
      adj[b.index].push_back(a);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
  }

  std::vector<NodeId> hosts() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes)
      if (n.kind == NodeKind::Host) out.push_back(n.id);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Diagnostics

struct Diagnostics {
  bool connected = false;                 // over infrastructure nodes
  std::map<int, int> degree_histogram;    // infra-to-infra degree -> count
  double average_infra_degree = 0.0;
  long long total_capacity = 0;
  long long infra_capacity = 0;
  long long host_capacity = 0;
  std::vector<std::string> issues;        // structural invariant violations

  bool well_formed() const { return connected && issues.empty(); }
};

inline Diagnostics validate(const Topology& t) {
  Diagnostics d;
  const std::size_t n = t.nodes.size();

  std::vector<std::size_t> infra;
  for (const auto& node : t.nodes) {
    d.total_capacity += node.memory_capacity;
    if (node.kind == NodeKind::Host) {
      d.host_capacity += node.memory_capacity;
    } else {
      d.infra_capacity += node.memory_capacity;
      infra.push_back(node.id.index);
    }
    if (node.memory_capacity < 0)
      d.issues.push_back("node " + std::to_string(node.id.index) + " has negative capacity");
    if (node.kind == NodeKind::Switch && node.memory_capacity != 0)
      d.issues.push_back("switch " + std::to_string(node.id.index) + " has nonzero memory");
  }
  for (std::size_t i = 0; i < n; ++i)
    if (t.nodes[i].id.index != i) d.issues.push_back("node ids are not dense from 0");

  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<int> degree(n, 0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (auto [a, b] : t.edges) {
    if (a.index >= n || b.index >= n) {
      d.issues.push_back("edge references unknown node");
      continue;
    }
    if (a == b) {
      d.issues.push_back("self-loop at node " + std::to_string(a.index));
      continue;
    }
    seen.emplace_back(std::min(a.index, b.index), std::max(a.index, b.index));
    ++degree[a.index];
    ++degree[b.index];
    bool a_infra = t.nodes[a.index].kind != NodeKind::Host;
    bool b_infra = t.nodes[b.index].kind != NodeKind::Host;
    if (a_infra && b_infra) {
      adj[a.index].push_back(b.index);
      adj[b.index].push_back(a.index);
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    d.issues.push_back("duplicate edge");

  for (const auto& node : t.nodes) {
    if (node.kind != NodeKind::Host) continue;
    if (degree[node.id.index] != 1) {
      d.issues.push_back("host " + std::to_string(node.id.index) + " has degree " +
                         std::to_string(degree[node.id.index]));
      continue;
    }
    for (auto [a, b] : t.edges) {
      NodeId other;
      if (a == node.id) other = b;
      else if (b == node.id) other = a;
      else continue;
      if (other.index < n && t.nodes[other.index].kind == NodeKind::Host)
        d.issues.push_back("host " + std::to_string(node.id.index) + " attached to a host");
    }
  }

  long long degree_sum = 0;
  for (auto v : infra) {
    int deg = static_cast<int>(adj[v].size());
    ++d.degree_histogram[deg];
    degree_sum += deg;
  }
  d.average_infra_degree = infra.empty() ? 0.0 : static_cast<double>(degree_sum) / infra.size();

  if (infra.empty()) {
    d.connected = false;
  } else {
    std::vector<char> visited(n, 0);
    std::vector<std::size_t> stack{infra.front()};
    visited[infra.front()] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : adj[u])
        if (!visited[v]) {
          visited[v] = 1;
          ++reached;
          stack.push_back(v);
        }
    }
    d.connected = reached == infra.size();
  }
  return d;
}

// ---------------------------------------------------------------------------
// Waxman generation

struct WaxmanParams {
  int n_infra = 50;
  double target_avg_degree = 4.0;
  double area_side = 100.0;
  double alpha = 0.4;
  std::uint64_t seed = 0;
  int memory_capacity = 1000;
  NetworkKind kind = NetworkKind::TeleQDN;
  int max_iterations = 200;
  double degree_tolerance = 0.5;
};

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

struct CandidatePair {
  std::uint32_t u, v;
  double dist;
  double draw;
};

// Edge set for a given beta, including connectivity repair.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> waxman_edges(
    const std::vector<CandidatePair>& pairs, const std::vector<std::size_t>& by_distance,
    std::size_t n, double beta, double alpha, double d_max) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<char> chosen(pairs.size(), 0);
  DisjointSets components(n);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& c = pairs[i];
    double prob = d_max > 0 ? beta * std::exp(-c.dist / (alpha * d_max)) : beta;
    if (c.draw < prob) {
      chosen[i] = 1;
      edges.emplace_back(c.u, c.v);
      components.unite(c.u, c.v);
    }
  }
  // Shortest candidate edges that join distinct components (Kruskal over the
  // component graph) give the minimal repair set.
  for (auto i : by_distance) {
    if (chosen[i]) continue;
    if (components.unite(pairs[i].u, pairs[i].v)) edges.emplace_back(pairs[i].u, pairs[i].v);
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace detail

/// Waxman topology with one Host attached to every infrastructure node.
///
/// Pair (u, v) is linked iff its pre-drawn uniform falls below
/// beta * exp(-d / (alpha * d_max)). Drawing once per pair makes the edge set
/// monotone in beta, so beta is found by bisection on the realized average
/// degree (after connectivity repair).
inline Topology generate_waxman(const WaxmanParams& p) {
  if (p.n_infra < 2) throw Error(Errc::invalid_argument, "n_infra must be at least 2");
  if (!(p.target_avg_degree > 0)) throw Error(Errc::invalid_argument, "target degree must be positive");
  if (!(p.area_side > 0)) throw Error(Errc::invalid_argument, "area side must be positive");
  if (!(p.alpha > 0 && p.alpha <= 1)) throw Error(Errc::invalid_argument, "alpha must be in (0, 1]");
  if (p.memory_capacity < 0) throw Error(Errc::invalid_argument, "memory capacity must be non-negative");

  const std::size_t n = static_cast<std::size_t>(p.n_infra);
  RandomStream rng(p.seed, "topology");
  std::vector<Position> pos(n);
  for (auto& q : pos) {
    q.x = rng.uniform() * p.area_side;
    q.y = rng.uniform() * p.area_side;
  }

  std::vector<detail::CandidatePair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  double d_max = 0.0;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v) {
      double d = distance(pos[u], pos[v]);
      d_max = std::max(d_max, d);
      pairs.push_back({u, v, d, rng.uniform()});
    }
  std::vector<std::size_t> by_distance(pairs.size());
  std::iota(by_distance.begin(), by_distance.end(), 0);
  std::stable_sort(by_distance.begin(), by_distance.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].dist < pairs[b].dist; });

  auto avg_degree = [&](const auto& edges) { return 2.0 * edges.size() / n; };

  // At beta_hi every probability reaches 1.
  double lo = 0.0, hi = std::exp(1.0 / p.alpha);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> best;
  bool found = false;
  for (int it = 0; it < p.max_iterations; ++it) {
    double beta = 0.5 * (lo + hi);
    auto edges = detail::waxman_edges(pairs, by_distance, n, beta, p.alpha, d_max);
    double deg = avg_degree(edges);
    if (std::abs(deg - p.target_avg_degree) <= p.degree_tolerance) {
      best = std::move(edges);
      found = true;
      break;
    }
    if (deg < p.target_avg_degree) lo = beta;
    else hi = beta;
  }
  if (!found) {
    // The bracket may have collapsed onto an endpoint; try those too.
    for (double beta : {lo, hi}) {
      auto edges = detail::waxman_edges(pairs, by_distance, n, beta, p.alpha, d_max);
      if (std::abs(avg_degree(edges) - p.target_avg_degree) <= p.degree_tolerance) {
        best = std::move(edges);
        found = true;
        break;
      }
    }
  }
  if (!found)
    throw Error(Errc::generation_failure, "could not calibrate Waxman beta to average degree " +
                                              std::to_string(p.target_avg_degree));

  Topology t;
  t.kind = p.kind;
  const NodeKind ik = infra_kind(p.kind);
  const int infra_memory = ik == NodeKind::Switch ? 0 : p.memory_capacity;
  for (std::size_t i = 0; i < n; ++i) t.add_node(ik, pos[i], infra_memory);
  for (auto [u, v] : best) t.add_edge(NodeId{u}, NodeId{v});
  for (std::size_t i = 0; i < n; ++i) {
    NodeId h = t.add_node(NodeKind::Host, pos[i], p.memory_capacity);
    t.add_edge(NodeId{static_cast<std::uint32_t>(i)}, h);
  }
  return t;
}

inline Topology generate_waxman(int n_infra, double target_avg_degree, double area_side,
                                double alpha, std::uint64_t seed) {
  WaxmanParams p;
  p.n_infra = n_infra;
  p.target_avg_degree = target_avg_degree;
  p.area_side = area_side;
  p.alpha = alpha;
  p.seed = seed;
  return generate_waxman(p);
}

/// Same graph, different network type: infra nodes change kind (switches lose
/// their memory).
inline Topology with_network_kind(Topology t, NetworkKind kind, int infra_memory) {
  t.kind = kind;
  for (auto& n : t.nodes) {
    if (n.kind == NodeKind::Host) continue;
    n.kind = infra_kind(kind);
    n.memory_capacity = n.kind == NodeKind::Switch ? 0 : infra_memory;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const Topology& t) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(t.kind));
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : t.nodes) {
    nlohmann::ordered_json e;
    e["id"] = n.id.index;
    e["kind"] = std::string(to_string(n.kind));
    e["x"] = n.position.x;
    e["y"] = n.position.y;
    e["memory"] = n.memory_capacity;
    if (n.split) {
      e["send_capacity"] = n.split->send;
      e["receive_capacity"] = n.split->receive;
    }
    nodes.push_back(std::move(e));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (auto [a, b] : t.edges) edges.push_back({a.index, b.index});
  return j;
}

template <class Json>
Topology topology_from_json(const Json& j) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::invalid_argument, "topology document: " + what);
  };
  require(j.is_object(), "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(it.key() == "kind" || it.key() == "nodes" || it.key() == "edges",
            "unknown key '" + it.key() + "'");
  require(j.contains("kind") && j.contains("nodes") && j.contains("edges"),
          "kind, nodes and edges are required");
  Topology t;
  t.kind = network_kind_from_string(j.at("kind").template get<std::string>());
  std::size_t expected = 0;
  for (const auto& e : j.at("nodes")) {
    for (auto it = e.begin(); it != e.end(); ++it) {
      static const std::vector<std::string> allowed{"id", "kind", "x", "y", "memory",
                                                    "send_capacity", "receive_capacity"};
      require(std::find(allowed.begin(), allowed.end(), it.key()) != allowed.end(),
              "unknown node key '" + it.key() + "'");
    }
    require(e.at("id").template get<std::size_t>() == expected, "node ids must be dense from 0");
    Node n;
    n.id = NodeId{static_cast<std::uint32_t>(expected++)};
    n.kind = node_kind_from_string(e.at("kind").template get<std::string>());
    n.position = {e.value("x", 0.0), e.value("y", 0.0)};
    n.memory_capacity = e.value("memory", 0);
    require(n.memory_capacity >= 0, "memory must be non-negative");
    if (e.contains("send_capacity") || e.contains("receive_capacity")) {
      n.split = PoolSplit{e.value("send_capacity", 0), e.value("receive_capacity", 0)};
      require(n.split->send >= 0 && n.split->receive >= 0, "pool sizes must be non-negative");
    }
    t.nodes.push_back(n);
  }
  for (const auto& e : j.at("edges")) {
    require(e.is_array() && e.size() == 2, "edges are [a, b] pairs");
    auto a = e[0].template get<std::uint32_t>();
    auto b = e[1].template get<std::uint32_t>();
    require(a < t.nodes.size() && b < t.nodes.size(), "edge references unknown node");
    t.add_edge(NodeId{a}, NodeId{b});
  }
  return t;
}

}  // namespace qtp

template <>
struct std::hash<qtp::NodeId> {
  std::size_t operator()(qtp::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.index); }
};
