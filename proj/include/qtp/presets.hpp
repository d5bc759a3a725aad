#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtp/emit.hpp"
#include "qtp/engine.hpp"
#include "qtp/metrics.hpp"

namespace qtp {

// ---------------------------------------------------------------------------
// Scenario builders

/// Many-to-one micro network: five ingress hosts and one egress host hang off
/// a single infrastructure node. Only the egress receive pool (100 units) is
/// scarce.
inline Topology appendix_e_topology(NetworkKind kind) {
  constexpr int kLarge = 1'000'000;
  Topology t;
  t.kind = kind;
  const NodeKind hub_kind = infra_kind(kind);
  NodeId hub = t.add_node(hub_kind, {50, 50}, hub_kind == NodeKind::Switch ? 0 : kLarge);
  for (int i = 0; i < 5; ++i) {
    NodeId h = t.add_node(NodeKind::Host, {20.0 * i, 0}, kLarge);
    t.nodes[h.index].split = PoolSplit{kLarge, 0};
    t.add_edge(hub, h);
  }
  NodeId egress = t.add_node(NodeKind::Host, {50, 100}, 100);
  t.nodes[egress.index].split = PoolSplit{0, 100};
  t.add_edge(hub, egress);
  return t;
}

inline constexpr NodeId kAppendixEEgress{6};
inline constexpr std::array<int, 5> kAppendixEInitialWindows{1, 8, 16, 32, 64};

/// Tele-QTP sessions start at staggered windows in CA, as late arrivals would;
/// TAG-QTP sessions all start together at W = 2 in SS over a switched network.
inline RunConfig appendix_e_config(Protocol protocol, std::uint64_t seed = 0) {
  RunConfig c;
  c.protocol = protocol;
  c.network = protocol == Protocol::TagQTP ? NetworkKind::TagQdnS : NetworkKind::TeleQDN;
  c.topology = appendix_e_topology(c.network);
  c.seed = seed;
  c.n_slots = 200;
  c.p = 1.0;
  for (std::uint32_t i = 0; i < 5; ++i) {
    SessionSpec s;
    s.src = NodeId{1 + i};
    s.dst = kAppendixEEgress;
    if (protocol != Protocol::TagQTP) {
      s.initial_window = kAppendixEInitialWindows[i];
      s.initial_phase = Phase::CongestionAvoidance;
    }
    c.sessions.push_back(s);
  }
  return c;
}

/// N Tele-QTP sessions whose only shared constraint is an egress receive pool
/// of `capacity` units.
inline RunConfig single_bottleneck_config(int n_sessions, int capacity, int n_slots,
                                          Protocol protocol = Protocol::TeleQTP) {
  constexpr int kLarge = 1'000'000;
  Topology t;
  t.kind = NetworkKind::TeleQDN;
  NodeId hub = t.add_node(NodeKind::Repeater, {0, 0}, kLarge);
  for (int i = 0; i < n_sessions; ++i) {
    NodeId h = t.add_node(NodeKind::Host, {static_cast<double>(i), 1}, kLarge);
    t.nodes[h.index].split = PoolSplit{kLarge, 0};
    t.add_edge(hub, h);
  }
  NodeId egress = t.add_node(NodeKind::Host, {0, -1}, capacity);
  t.nodes[egress.index].split = PoolSplit{0, capacity};
  t.add_edge(hub, egress);

  RunConfig c;
  c.protocol = protocol;
  c.topology = std::move(t);
  c.n_slots = n_slots;
  for (int i = 0; i < n_sessions; ++i) {
    SessionSpec s;
    s.src = NodeId{static_cast<std::uint32_t>(1 + i)};
    s.dst = egress;
    c.sessions.push_back(s);
  }
  return c;
}

/// Waxman network with random unbounded sessions; the topology seed follows
/// the run seed so every protocol of a seed sees the same graph and pairs.
inline RunConfig waxman_run_config(Protocol protocol, NetworkKind network, int n_infra, int n_sessions,
                                   std::uint64_t seed, int n_slots = 200, double p = 1.0,
                                   double slot_length = 1.0) {
  RunConfig c;
  c.protocol = protocol;
  c.network = network;
  WaxmanParams w;
  w.n_infra = n_infra;
  w.seed = seed;
  c.topology = w;
  c.random_sessions = n_sessions;
  c.seed = seed;
  c.n_slots = n_slots;
  c.p = p;
  c.slot_length = slot_length;
  c.record_pools = true;
  return c;
}

struct ProtocolSetup {
  Protocol protocol;
  NetworkKind network;
};

/// The four wide-area contenders.
inline constexpr std::array<ProtocolSetup, 4> kWideAreaSetups{{{Protocol::TeleQTP, NetworkKind::TeleQDN},
                                                               {Protocol::EW, NetworkKind::TeleQDN},
                                                               {Protocol::FRA, NetworkKind::TeleQDN},
                                                               {Protocol::TagQTP, NetworkKind::TagQdnR}}};

inline std::string setup_name(const ProtocolSetup& s) {
  return std::string(to_string(s.protocol)) + "/" + std::string(to_string(s.network));
}

// ---------------------------------------------------------------------------
// Presets

inline constexpr std::array<std::string_view, 5> kPresetNames{"appendix_e", "net_size_sweep", "workload_sweep",
                                                              "tradeoff_prob", "tradeoff_slot"};

inline const std::vector<double>& tradeoff_probabilities() {
  static const std::vector<double> v{0.5, 0.6, 0.65, 0.7, 0.75, 0.8, 0.84, 0.88, 0.92, 0.96, 1.0};
  return v;
}

inline const std::vector<double>& tradeoff_ratios() {
  static const std::vector<double> v{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
  return v;
}

inline constexpr double kTradeoffSlotP = 0.65;

struct PresetRun {
  std::string label;
  std::vector<std::pair<std::string, Cell>> params;  // sweep coordinates other than the seed
  RunConfig config;
};

struct ExperimentPreset {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<PresetRun> runs;
};

inline ExperimentPreset make_preset(std::string_view name, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw Error(Errc::invalid_argument, "at least one seed is required");
  ExperimentPreset p;
  p.name = std::string(name);
  auto seed_tag = [](std::uint64_t s) { return "seed" + std::to_string(s); };

  if (name == "appendix_e") {
    p.param_names = {"setup"};
    for (auto seed : seeds)
      for (auto proto : {Protocol::TeleQTP, Protocol::TagQTP}) {
        auto c = appendix_e_config(proto, seed);
        std::string setup = setup_name({c.protocol, c.network});
        p.runs.push_back({std::string(to_string(proto)) + "_" + seed_tag(seed), {{"setup", setup}}, c});
      }
  } else if (name == "net_size_sweep" || name == "workload_sweep") {
    const bool by_size = name == "net_size_sweep";
    p.param_names = {by_size ? "n_infra" : "n_sessions", "setup"};
    const std::vector<int> values = by_size ? std::vector<int>{40, 50, 60, 70} : std::vector<int>{150, 200, 250};
    for (auto seed : seeds)
      for (int v : values)
        for (const auto& s : kWideAreaSetups) {
          auto c = waxman_run_config(s.protocol, s.network, by_size ? v : 50, by_size ? 100 : v, seed);
          p.runs.push_back({p.param_names[0] + std::to_string(v) + "_" + std::string(to_string(s.protocol)) + "_" +
                                seed_tag(seed),
                            {{p.param_names[0], std::int64_t{v}}, {"setup", setup_name(s)}},
                            c});
        }
  } else if (name == "tradeoff_prob") {
    p.param_names = {"p", "setup"};
    for (auto seed : seeds) {
      auto tele = waxman_run_config(Protocol::TeleQTP, NetworkKind::TeleQDN, 50, 100, seed);
      p.runs.push_back({"TeleQTP_" + seed_tag(seed), {{"p", 1.0}, {"setup", setup_name({tele.protocol, tele.network})}},
                        tele});
      for (double prob : tradeoff_probabilities()) {
        auto c = waxman_run_config(Protocol::TagQTP, NetworkKind::TagQdnS, 50, 100, seed, 200, prob);
        p.runs.push_back({"TagQTP_p" + format_real(prob) + "_" + seed_tag(seed),
                          {{"p", prob}, {"setup", setup_name({c.protocol, c.network})}},
                          c});
      }
    }
  } else if (name == "tradeoff_slot") {
    p.param_names = {"slot_ratio", "setup"};
    for (auto seed : seeds) {
      auto tag = waxman_run_config(Protocol::TagQTP, NetworkKind::TagQdnS, 50, 100, seed, 200, kTradeoffSlotP);
      p.runs.push_back({"TagQTP_" + seed_tag(seed), {{"slot_ratio", 1.0}, {"setup", setup_name({tag.protocol, tag.network})}},
                        tag});
      for (double ratio : tradeoff_ratios()) {
        auto c = waxman_run_config(Protocol::TeleQTP, NetworkKind::TeleQDN, 50, 100, seed, 200, 1.0, ratio);
        p.runs.push_back({"TeleQTP_r" + format_real(ratio) + "_" + seed_tag(seed),
                          {{"slot_ratio", ratio}, {"setup", setup_name({c.protocol, c.network})}},
                          c});
      }
    }
  } else {
    throw Error(Errc::unknown_preset, "unknown preset '" + std::string(name) + "'");
  }
  return p;
}

struct PresetOutput {
  Table runs;      // one row per run
  Table means;     // seed means per sweep point
  Table analysis;  // preset-specific derived metrics
};

namespace detail {

struct Aggregate {
  std::vector<Cell> params;
  int n = 0;
  double per_slot = 0, per_time = 0, mean_window = 0, jain = 0, utilization = 0;
};

inline Table appendix_e_analysis(const std::vector<std::pair<const PresetRun*, RunResult>>& results) {
  Table t{{"setup", "seed", "jain_first100", "min_util_after10", "idle_fraction", "idle_bound", "window_min",
           "window_max", "window_mean", "window_period"},
          {}};
  for (const auto& [run, r] : results) {
    const double j = window_fairness(r, 0, 100).index;
    auto u = utilization(r, kAppendixEEgress, PoolKind::Receive);
    double min_util = 1.0;
    for (std::size_t i = 10; i < u.size(); ++i) min_util = std::min(min_util, u[i]);
    const auto warmup = static_cast<std::size_t>(default_warmup(r.n_slots));
    auto series = window_series(r).begin()->second;
    auto st = steady_state_stats(series, warmup);
    t.add({std::get<std::string>(run->params[0].second), static_cast<std::int64_t>(r.seed), j, min_util,
           idle_fraction(r, kAppendixEEgress, PoolKind::Receive, warmup), idle_bound(5, 100), st.min, st.max, st.mean,
           st.period ? *st.period : std::nan("")});
  }
  return t;
}

}  // namespace detail

/// Runs every configuration of a preset in order. When `out` is set, writes
/// runs/means/analysis tables there, plus per-run traces if `traces`.
inline PresetOutput run_preset(std::string_view name, std::span<const std::uint64_t> seeds,
                               const std::optional<std::filesystem::path>& out = std::nullopt,
                               Format format = Format::Tabular, bool traces = false) {
  const ExperimentPreset preset = make_preset(name, seeds);
  PresetOutput o;
  o.runs.header = {"label"};
  for (const auto& n : preset.param_names) o.runs.header.push_back(n);
  for (const auto& h : summary_header()) o.runs.header.push_back(h);

  std::vector<std::pair<const PresetRun*, RunResult>> results;
  std::vector<detail::Aggregate> groups;
  for (const auto& run : preset.runs) {
    RunResult r = qtp::run(run.config);
    if (out && traces) emit_run(r, *out / "runs" / run.label, format);

    std::vector<Cell> row{run.label};
    std::vector<Cell> params;
    for (const auto& [_, v] : run.params) params.push_back(v);
    row.insert(row.end(), params.begin(), params.end());
    auto summary = summary_row(r);
    row.insert(row.end(), summary.begin(), summary.end());
    o.runs.add(row);

    auto key_text = [](const std::vector<Cell>& cells) {
      std::string k;
      for (const auto& c : cells) k += to_text(c) + "\x1f";
      return k;
    };
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const detail::Aggregate& g) { return key_text(g.params) == key_text(params); });
    if (it == groups.end()) it = groups.insert(groups.end(), detail::Aggregate{params});
    auto s = summarize(r);
    it->n += 1;
    it->per_slot += s.throughput.per_slot;
    it->per_time += s.throughput.per_time;
    it->mean_window += s.mean_window;
    it->jain += s.jain;
    it->utilization += s.mean_utilization;

    if (preset.name == "appendix_e") results.emplace_back(&run, std::move(r));
  }

  o.means.header = preset.param_names;
  for (const char* h : {"seeds", "per_slot", "per_time", "mean_window", "jain", "mean_utilization"})
    o.means.header.push_back(h);
  for (const auto& g : groups) {
    std::vector<Cell> row = g.params;
    const double n = g.n;
    row.insert(row.end(), {std::int64_t{g.n}, g.per_slot / n, g.per_time / n, g.mean_window / n, g.jain / n,
                           g.utilization / n});
    o.means.add(row);
  }

  auto mean_of = [&](const std::string& setup, std::optional<Cell> first = std::nullopt) -> std::optional<double> {
    for (const auto& g : groups) {
      if (std::get<std::string>(g.params.back()) != setup) continue;
      if (first && to_text(g.params.front()) != to_text(*first)) continue;
      return g.per_time / g.n;
    }
    return std::nullopt;
  };

  if (preset.name == "appendix_e") {
    o.analysis = detail::appendix_e_analysis(results);
  } else if (preset.name == "net_size_sweep" || preset.name == "workload_sweep") {
    o.analysis.header = {preset.param_names[0], "tele_over_ew_pct", "tele_over_fra_pct", "tele_over_tag_pct"};
    std::vector<std::string> seen;
    for (const auto& g : groups) {
      const Cell v = g.params.front();
      if (std::find(seen.begin(), seen.end(), to_text(v)) != seen.end()) continue;
      seen.push_back(to_text(v));
      const double tele = *mean_of(setup_name(kWideAreaSetups[0]), v);
      std::vector<Cell> row{v};
      for (std::size_t k = 1; k < kWideAreaSetups.size(); ++k) {
        const double other = *mean_of(setup_name(kWideAreaSetups[k]), v);
        row.push_back(other > 0 ? 100.0 * (tele / other - 1.0) : std::nan(""));
      }
      o.analysis.add(row);
    }
  } else {
    const bool by_p = preset.name == "tradeoff_prob";
    const auto& xs = by_p ? tradeoff_probabilities() : tradeoff_ratios();
    const std::string tele_setup = setup_name({Protocol::TeleQTP, NetworkKind::TeleQDN});
    const std::string tag_setup = setup_name({Protocol::TagQTP, NetworkKind::TagQdnS});
    o.analysis.header = {by_p ? "p" : "slot_ratio", "tele_per_time", "tag_per_time"};
    std::vector<double> tele, tag;
    for (double x : xs) {
      tele.push_back(by_p ? *mean_of(tele_setup) : *mean_of(tele_setup, Cell{x}));
      tag.push_back(by_p ? *mean_of(tag_setup, Cell{x}) : *mean_of(tag_setup));
      o.analysis.add({x, tele.back(), tag.back()});
    }
    auto cross = crossover(xs, tag, tele);
    o.analysis.add({std::string("crossover"), cross ? Cell{*cross} : Cell{std::string("none")}, std::string("")});
  }

  if (out) {
    if (wants_tabular(format)) {
      write_file(*out / (preset.name + "_runs.csv"), to_csv(o.runs));
      write_file(*out / (preset.name + "_means.csv"), to_csv(o.means));
      write_file(*out / (preset.name + "_analysis.csv"), to_csv(o.analysis));
    }
    if (wants_records(format))
      write_file(*out / (preset.name + ".ndjson"),
                 to_ndjson(o.runs, "run") + to_ndjson(o.means, "mean") + to_ndjson(o.analysis, "analysis"));
  }
  return o;
}

}  // namespace qtp
