#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qtp/error.hpp"
#include "qtp/memory.hpp"
#include "qtp/rng.hpp"
#include "qtp/routing.hpp"
#include "qtp/tag.hpp"
#include "qtp/tele.hpp"
#include "qtp/topology.hpp"
#include "qtp/window.hpp"

namespace qtp {

enum class Protocol { TeleQTP, EW, FRA, TagQTP };

constexpr std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::TeleQTP: return "TeleQTP";
    case Protocol::EW: return "EW";
    case Protocol::FRA: return "FRA";
    case Protocol::TagQTP: return "TagQTP";
  }
  return "?";
}

inline Protocol protocol_from_string(std::string_view s) {
  for (auto p : {Protocol::TeleQTP, Protocol::EW, Protocol::FRA, Protocol::TagQTP})
    if (to_string(p) == s) return p;
  throw Error(Errc::invalid_argument, "unknown protocol '" + std::string(s) + "'");
}

inline bool compatible(Protocol p, NetworkKind k) {
  return p == Protocol::TagQTP ? k != NetworkKind::TeleQDN : k == NetworkKind::TeleQDN;
}

struct SessionSpec {
  NodeId src;
  NodeId dst;
  std::optional<std::int64_t> qubits;  // nullopt = unbounded
  int start_slot = 0;
  std::optional<int> initial_window;   // protocol default when unset
  std::optional<Phase> initial_phase;
  std::optional<int> window_cap;
};

using TopologySpec = std::variant<WaxmanParams, Topology>;

struct RunConfig {
  TopologySpec topology = WaxmanParams{};
  Protocol protocol = Protocol::TeleQTP;
  NetworkKind network = NetworkKind::TeleQDN;
  std::vector<SessionSpec> sessions;
  int random_sessions = 0;  // extra unbounded sessions between distinct random host pairs
  int n_slots = 200;
  double p = 1.0;
  double slot_length = 1.0;
  std::uint64_t seed = 0;
  int memory_capacity = 1000;
  double route_lambda = kDefaultRouteLambda;
  bool record_pools = true;
};

inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw Error(Errc::config_error, m); };
  if (!compatible(c.protocol, c.network))
    fail(std::string(to_string(c.protocol)) + " cannot run on " + std::string(to_string(c.network)));
  if (c.n_slots < 0) fail("n_slots must be non-negative");
  if (!(c.p >= 0.0 && c.p <= 1.0)) fail("p must lie in [0, 1]");
  if (!(c.slot_length > 0.0)) fail("slot_length must be positive");
  if (c.memory_capacity < 0) fail("memory_capacity must be non-negative");
  if (c.random_sessions < 0) fail("random_sessions must be non-negative");
  if (!(c.route_lambda >= 0.0)) fail("route_lambda must be non-negative");
  if (const auto* t = std::get_if<Topology>(&c.topology); t && t->kind != c.network)
    fail("topology kind " + std::string(to_string(t->kind)) + " does not match network " +
         std::string(to_string(c.network)));
  for (const auto& s : c.sessions) {
    if (s.start_slot < 0) fail("start_slot must be non-negative");
    if (s.qubits && *s.qubits < 0) fail("qubits must be non-negative");
    if (s.initial_window && *s.initial_window < 1) fail("initial_window must be at least 1");
    if (s.window_cap && *s.window_cap < 1) fail("window_cap must be at least 1");
  }
}

// ---------------------------------------------------------------------------
// Trace

/// One row per active flow per slot. Tele sessions and TAG-QDN-S sessions have
/// a single hop; TAG-QDN-R sessions report every hop.
struct FlowRow {
  int slot = 0;
  SessionId session = 0;
  int hop = 0;
  int hops = 1;
  NodeId sender;
  NodeId receiver;
  int announced = 0;
  bool ce = false;
  int granted = 0;
  std::int64_t delivered = 0;
  Phase phase = Phase::SlowStart;
  int first_sent = 0;
  int second_sent = 0;
  int losses = 0;
  int stored = 0;

  bool final_hop() const { return hop + 1 == hops; }
};

struct PoolRow {
  int slot = 0;
  NodeId node;
  PoolKind pool = PoolKind::Transit;
  std::int64_t reserved = 0;
  std::int64_t capacity = 0;
};

struct TraceRecord {
  int slot = 0;
  std::vector<FlowRow> flows;
  std::vector<PoolRow> pools;
};

struct SessionSummary {
  SessionId id = 0;
  NodeId src;
  NodeId dst;
  std::optional<std::int64_t> qubits;
  int start_slot = 0;
  std::vector<NodeId> path;  // empty if never admitted
  std::int64_t delivered = 0;
};

struct RunResult {
  Protocol protocol = Protocol::TeleQTP;
  NetworkKind network = NetworkKind::TeleQDN;
  std::uint64_t seed = 0;
  int n_slots = 0;
  double slot_length = 1.0;
  double p = 1.0;
  Topology topology;
  std::vector<SessionSummary> sessions;
  std::vector<TraceRecord> trace;

  std::int64_t total_delivered() const {
    std::int64_t d = 0;
    for (const auto& s : sessions) d += s.delivered;
    return d;
  }
};

// ---------------------------------------------------------------------------
// Engine

inline Topology build_topology(const RunConfig& c) {
  if (const auto* t = std::get_if<Topology>(&c.topology)) return *t;
  WaxmanParams w = std::get<WaxmanParams>(c.topology);
  w.kind = c.network;
  w.memory_capacity = c.memory_capacity;
  return generate_waxman(w);
}

/// Distinct (src, dst) host pairs drawn from the "sessions" stream.
inline std::vector<SessionSpec> random_session_specs(const Topology& t, int count, std::uint64_t seed) {
  auto hosts = t.hosts();
  const std::uint64_t h = hosts.size();
  if (count > 0 && h < 2) throw Error(Errc::config_error, "random sessions need at least two hosts");
  if (static_cast<std::uint64_t>(count) > h * (h - 1))
    throw Error(Errc::config_error, "more random sessions than distinct host pairs");
  RandomStream rng(seed, "sessions");
  std::vector<std::pair<NodeId, NodeId>> used;
  std::vector<SessionSpec> out;
  while (static_cast<int>(out.size()) < count) {
    NodeId a = hosts[rng.below(h)];
    NodeId b = hosts[rng.below(h)];
    if (a == b || std::find(used.begin(), used.end(), std::pair{a, b}) != used.end()) continue;
    used.emplace_back(a, b);
    SessionSpec s;
    s.src = a;
    s.dst = b;
    out.push_back(s);
  }
  return out;
}

class Engine {
 public:
  explicit Engine(RunConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    topo_ = build_topology(cfg_);
    if (topo_.kind != cfg_.network) throw Error(Errc::config_error, "topology kind does not match network");
    adjacency_ = topo_.adjacency();
    pools_ = PoolSet(topo_);
    channel_ = RandomStream(cfg_.seed, "channel");
    load_.assign(topo_.size(), 0.0);

    specs_ = cfg_.sessions;
    auto extra = random_session_specs(topo_, cfg_.random_sessions, cfg_.seed);
    specs_.insert(specs_.end(), extra.begin(), extra.end());
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& s = specs_[i];
      if (s.src.index >= topo_.size() || s.dst.index >= topo_.size() || !topo_.is_host(s.src) ||
          !topo_.is_host(s.dst) || s.src == s.dst)
        throw Error(Errc::config_error, "session " + std::to_string(i) + " needs two distinct host endpoints");
      summaries_.push_back(SessionSummary{static_cast<SessionId>(i), s.src, s.dst, s.qubits, s.start_slot, {}, 0});
    }
  }

  const Topology& topology() const { return topo_; }
  const PoolSet& pools() const { return pools_; }
  int slot() const { return slot_; }
  bool finished() const { return slot_ >= cfg_.n_slots; }

  /// One slot: admit, announce, reserve, transfer, record, release, update.
  TraceRecord step() {
    if (finished()) throw Error(Errc::invalid_argument, "run already complete");
    admit();
    TraceRecord rec{slot_, {}, {}};
    if (cfg_.protocol == Protocol::TagQTP) step_tag(rec);
    else step_tele(rec);

    if (cfg_.record_pools)
      for (const auto& [ref, pool] : pools_.pools())
        rec.pools.push_back(PoolRow{slot_, ref.node, ref.kind, pool.reserved(), pool.capacity()});
    remember_load();
    pools_.clear_all();

    if (cfg_.protocol == Protocol::TagQTP) update_tag(rec);
    else update_tele(rec);
    ++slot_;
    return rec;
  }

  RunResult run() {
    RunResult r;
    r.protocol = cfg_.protocol;
    r.network = cfg_.network;
    r.seed = cfg_.seed;
    r.n_slots = cfg_.n_slots;
    r.slot_length = cfg_.slot_length;
    r.p = cfg_.p;
    r.trace.reserve(cfg_.n_slots);
    while (!finished()) r.trace.push_back(step());
    r.topology = topo_;
    r.sessions = summaries_;
    return r;
  }

 private:
  struct TagSession {
    SessionId id = 0;
    std::optional<std::int64_t> qubits;
    std::int64_t delivered = 0;
    std::vector<TagHopSession> hops;

    bool active() const { return !qubits || delivered < *qubits; }
  };

  // -- admission ------------------------------------------------------------

  void admit() {
    std::vector<double> provisional = load_;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& s = specs_[i];
      if (s.start_slot != slot_) continue;
      Path path = compute_path(topo_, s.src, s.dst, provisional, cfg_.route_lambda, &adjacency_);
      summaries_[i].path = path.nodes;
      const int w0 = s.initial_window.value_or(cfg_.protocol == Protocol::TagQTP ? kTagInitialWindow : 1);
      add_provisional(provisional, path, w0);
      if (cfg_.protocol == Protocol::TagQTP) admit_tag(static_cast<SessionId>(i), s, path, w0);
      else admit_tele(static_cast<SessionId>(i), s, path, w0);
    }
  }

  // Routing sees the previous slot's occupancy plus the first-slot demand of
  // sessions admitted earlier in this slot.
  void add_provisional(std::vector<double>& load, const Path& path, int w0) const {
    for (std::size_t k = 0; k < path.nodes.size(); ++k) {
      NodeId v = path.nodes[k];
      const double cap = node_capacity(v);
      if (cap <= 0) continue;
      const double units = (k + 1 == path.nodes.size() ? 1.0 : 2.0) * w0;
      load[v.index] = std::min(1.0, load[v.index] + units / cap);
    }
  }

  double node_capacity(NodeId v) const {
    double c = 0;
    for (auto kind : {PoolKind::Send, PoolKind::Receive, PoolKind::Transit}) c += pools_.capacity({v, kind});
    return c;
  }

  void remember_load() {
    std::fill(load_.begin(), load_.end(), 0.0);
    std::vector<double> cap(topo_.size(), 0.0);
    for (const auto& [ref, pool] : pools_.pools()) {
      load_[ref.node.index] += static_cast<double>(pool.reserved());
      cap[ref.node.index] += static_cast<double>(pool.capacity());
    }
    for (std::size_t v = 0; v < load_.size(); ++v) load_[v] = cap[v] > 0 ? load_[v] / cap[v] : 0.0;
  }

  void admit_tele(SessionId id, const SessionSpec& s, const Path& path, int w0) {
    TeleSession t;
    t.id = id;
    t.src = s.src;
    t.dst = s.dst;
    t.path = path;
    t.window = w0;
    t.phase = s.initial_phase.value_or(Phase::SlowStart);
    t.remaining = s.qubits;
    t.window_cap = s.window_cap;
    if (t.window_cap) t.window = std::min(t.window, *t.window_cap);
    tele_.push_back(std::move(t));
  }

  void admit_tag(SessionId id, const SessionSpec& s, const Path& path, int w0) {
    TagSession ts;
    ts.id = id;
    ts.qubits = s.qubits;
    std::vector<std::pair<NodeId, NodeId>> links;
    if (cfg_.network == NetworkKind::TagQdnS) links.emplace_back(path.src, path.dst);
    else
      for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) links.emplace_back(path.nodes[k], path.nodes[k + 1]);
    for (std::size_t k = 0; k < links.size(); ++k) {
      TagHopSession h;
      h.flow = FlowKey{id, static_cast<std::uint16_t>(k)};
      h.sender = links[k].first;
      h.receiver = links[k].second;
      h.window = w0;
      h.phase = s.initial_phase.value_or(Phase::SlowStart);
      h.window_cap = s.window_cap;
      if (h.window_cap) h.window = std::min(h.window, *h.window_cap);
      h.is_source = k == 0;
      h.is_final = k + 1 == links.size();
      if (h.is_source) h.backlog = s.qubits;
      else h.queue_bound = static_cast<std::size_t>(pools_.capacity({h.sender, PoolKind::Send}) / kSharingsPerQubit);
      ts.hops.push_back(std::move(h));
    }
    tag_.push_back(std::move(ts));
  }

  // -- Tele-QTP / EW / FRA ----------------------------------------------------

  void step_tele(TraceRecord& rec) {
    std::vector<TeleSession*> active;
    for (auto& s : tele_)
      if (swc_announce(s)) active.push_back(&s);

    std::vector<ReservationOutcome> out;
    switch (cfg_.protocol) {
      case Protocol::EW: out = reserve_slot_ew(active, pools_); break;
      case Protocol::FRA: out = reserve_slot_fra(active, pools_); break;
      default: out = reserve_slot_qtp(active, pools_); break;
    }

    tele_delivered_.assign(tele_.size(), 0);
    for (std::size_t i = 0; i < active.size(); ++i) {
      TeleSession& s = *active[i];
      const std::int64_t d = teleport_transfer(s);
      // Circuits beyond the remaining backlog are never used.
      if (d < s.granted)
        for (const auto& r : tele_roles(s.path, pools_))
          pools_.at(r.pool).release(s.flow(), r.factor.ceil_mul(s.granted) - r.factor.ceil_mul(d));
      summaries_[s.id].delivered += d;
      tele_delivered_[&s - tele_.data()] = d;

      FlowRow row;
      row.slot = slot_;
      row.session = s.id;
      row.sender = s.src;
      row.receiver = s.dst;
      row.announced = out[i].announced;
      row.ce = s.ce;
      row.granted = s.granted;
      row.delivered = d;
      row.phase = s.phase;
      rec.flows.push_back(row);
    }
  }

  void update_tele(const TraceRecord&) {
    for (std::size_t i = 0; i < tele_.size(); ++i) {
      TeleSession& s = tele_[i];
      if (!s.active()) continue;
      if (cfg_.protocol == Protocol::EW) {
        if (s.remaining) *s.remaining = std::max<std::int64_t>(0, *s.remaining - tele_delivered_[i]);
        continue;
      }
      swc_update(s, s.ce, tele_delivered_[i]);
    }
  }

  // -- TAG-QTP ----------------------------------------------------------------

  void step_tag(TraceRecord& rec) {
    std::vector<TagHopSession*> hops;
    for (auto& ts : tag_)
      if (ts.active())
        for (auto& h : ts.hops) hops.push_back(&h);
    reserve_tag(hops, pools_);

    ChannelModel channel{cfg_.p};
    std::vector<std::pair<TagHopSession*, std::uint64_t>> forwards;
    for (auto& ts : tag_) {
      if (!ts.active()) continue;
      for (std::size_t k = 0; k < ts.hops.size(); ++k) {
        TagHopSession& h = ts.hops[k];
        if (h.deferred) continue;
        const int s = h.stored();
        std::int64_t receiver_free = h.receive_units - s;
        if (!h.is_final) receiver_free = std::min<std::int64_t>(receiver_free, ts.hops[k + 1].queue_room());
        const std::int64_t sender_free = h.send_units - h.sender_units();
        SlotPlan plan = plan_slot(h, h.granted, receiver_free, sender_free);
        HopSlotResult r = transmit(h, plan, channel, channel_);

        const auto delivered = static_cast<std::int64_t>(r.delivered.size());
        if (h.is_final) {
          ts.delivered += delivered;
          summaries_[ts.id].delivered += delivered;
        } else {
          for (auto q : r.delivered) forwards.emplace_back(&ts.hops[k + 1], q);
        }

        FlowRow row;
        row.slot = slot_;
        row.session = ts.id;
        row.hop = static_cast<int>(k);
        row.hops = static_cast<int>(ts.hops.size());
        row.sender = h.sender;
        row.receiver = h.receiver;
        row.announced = h.window;
        row.ce = h.ce;
        row.granted = h.granted;
        row.delivered = delivered;
        row.phase = h.phase;
        row.first_sent = r.firsts_sent;
        row.second_sent = r.seconds_sent;
        row.losses = r.losses;
        row.stored = h.stored();
        rec.flows.push_back(row);
      }
    }
    // Reconstructed qubits become available to the next hop next slot.
    for (auto [next, q] : forwards) relay_forward(*next, q);
  }

  void update_tag(const TraceRecord& rec) {
    for (const auto& row : rec.flows) {
      auto& h = tag_by_id(row.session).hops[row.hop];
      window_update_tag(h, h.ce);
    }
  }

  TagSession& tag_by_id(SessionId id) {
    for (auto& t : tag_)
      if (t.id == id) return t;
    throw Error(Errc::invalid_argument, "unknown session");
  }

  RunConfig cfg_;
  Topology topo_;
  std::vector<std::vector<NodeId>> adjacency_;
  PoolSet pools_;
  RandomStream channel_{0, "channel"};
  std::vector<double> load_;
  std::vector<SessionSpec> specs_;
  std::vector<SessionSummary> summaries_;
  std::vector<TeleSession> tele_;
  std::vector<std::int64_t> tele_delivered_;
  std::vector<TagSession> tag_;
  int slot_ = 0;
};

inline RunResult run(const RunConfig& cfg) { return Engine(cfg).run(); }

}  // namespace qtp
