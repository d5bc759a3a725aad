#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtp/engine.hpp"
#include "qtp/error.hpp"
#include "qtp/topology.hpp"

namespace qtp {

namespace detail {

inline std::size_t line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// The JSON parser keeps no source positions, so validation errors locate the
// first occurrence of the offending key in the raw text.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  auto pos = text.find('"' + key + '"');
  return pos == std::string::npos ? 0 : line_at(text, pos);
}

class ConfigReader {
 public:
  ConfigReader(std::string text, std::string origin, std::filesystem::path base)
      : text_(std::move(text)), origin_(std::move(origin)), base_(std::move(base)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = origin_;
    if (auto line = key.empty() ? 0 : line_of_key(text_, key)) where += ":" + std::to_string(line);
    throw Error(Errc::config_error, where + ": " + msg);
  }

  void only(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& ctx) const {
    if (!obj.is_object()) fail(ctx, "'" + ctx + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail(it.key(), "unknown key '" + it.key() + "'" + (ctx.empty() ? "" : " in '" + ctx + "'"));
    }
  }

  template <class T>
  T get(const nlohmann::json& obj, const char* key, T fallback) const {
    if (!obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(key, "'" + std::string(key) + "' has the wrong type");
    }
  }

  RunConfig parse() const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text_);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::config_error, origin_ + ":" + std::to_string(line_at(text_, e.byte > 0 ? e.byte - 1 : 0)) +
                                          ": malformed JSON (" + e.what() + ")");
    }
    only(j,
         {"seed", "protocol", "network", "n_slots", "p", "slot_length", "memory_capacity", "route_lambda",
          "record_pools", "topology", "sessions", "random_sessions"},
         "");
    RunConfig c;
    if (!j.contains("seed")) fail("", "missing 'seed' (seeds are mandatory)");
    c.seed = get<std::uint64_t>(j, "seed", 0);
    try {
      c.protocol = protocol_from_string(get<std::string>(j, "protocol", "TeleQTP"));
      c.network = j.contains("network")
                      ? network_kind_from_string(get<std::string>(j, "network", ""))
                      : (c.protocol == Protocol::TagQTP ? NetworkKind::TagQdnR : NetworkKind::TeleQDN);
    } catch (const Error& e) {
      fail(j.contains("network") ? "network" : "protocol", e.what());
    }
    c.n_slots = get<int>(j, "n_slots", c.n_slots);
    c.p = get<double>(j, "p", c.p);
    c.slot_length = get<double>(j, "slot_length", c.slot_length);
    c.memory_capacity = get<int>(j, "memory_capacity", c.memory_capacity);
    c.route_lambda = get<double>(j, "route_lambda", c.route_lambda);
    c.record_pools = get<bool>(j, "record_pools", c.record_pools);
    c.random_sessions = get<int>(j, "random_sessions", 0);

    WaxmanParams w;
    w.seed = c.seed;
    c.topology = w;
    if (j.contains("topology")) c.topology = topology(j.at("topology"), c.seed);
    if (j.contains("sessions")) {
      if (!j.at("sessions").is_array()) fail("sessions", "'sessions' must be a list");
      for (const auto& s : j.at("sessions")) c.sessions.push_back(session(s));
    }
    try {
      validate_config(c);
    } catch (const Error& e) {
      fail("", e.what());
    }
    return c;
  }

 private:
  TopologySpec topology(const nlohmann::json& t, std::uint64_t seed) const {
    only(t, {"waxman", "inline", "file"}, "topology");
    if (t.size() != 1) fail("topology", "'topology' needs exactly one of waxman, inline, file");
    try {
      if (t.contains("waxman")) {
        const auto& w = t.at("waxman");
        only(w, {"n_infra", "target_avg_degree", "area_side", "alpha", "seed", "max_iterations", "degree_tolerance"},
             "waxman");
        WaxmanParams p;
        p.n_infra = get<int>(w, "n_infra", p.n_infra);
        p.target_avg_degree = get<double>(w, "target_avg_degree", p.target_avg_degree);
        p.area_side = get<double>(w, "area_side", p.area_side);
        p.alpha = get<double>(w, "alpha", p.alpha);
        p.seed = get<std::uint64_t>(w, "seed", seed);
        p.max_iterations = get<int>(w, "max_iterations", p.max_iterations);
        p.degree_tolerance = get<double>(w, "degree_tolerance", p.degree_tolerance);
        return p;
      }
      if (t.contains("inline")) return topology_from_json(t.at("inline"));
      auto path = base_ / get<std::string>(t, "file", "");
      std::ifstream in(path);
      if (!in) fail("file", "cannot read topology file " + path.string());
      return topology_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      fail("topology", std::string("bad topology: ") + e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::config_error) throw;
      fail("topology", e.what());
    }
  }

  SessionSpec session(const nlohmann::json& s) const {
    only(s, {"src", "dst", "qubits", "start_slot", "initial_window", "initial_phase", "window_cap"}, "sessions");
    if (!s.contains("src") || !s.contains("dst")) fail("sessions", "every session needs src and dst");
    SessionSpec out;
    out.src = NodeId{get<std::uint32_t>(s, "src", 0)};
    out.dst = NodeId{get<std::uint32_t>(s, "dst", 0)};
    if (s.contains("qubits") && !s.at("qubits").is_null()) out.qubits = get<std::int64_t>(s, "qubits", 0);
    out.start_slot = get<int>(s, "start_slot", 0);
    if (s.contains("initial_window")) out.initial_window = get<int>(s, "initial_window", 1);
    if (s.contains("initial_phase")) {
      try {
        out.initial_phase = phase_from_string(get<std::string>(s, "initial_phase", ""));
      } catch (const Error& e) {
        fail("initial_phase", e.what());
      }
    }
    if (s.contains("window_cap")) out.window_cap = get<int>(s, "window_cap", 1);
    return out;
  }

  std::string text_;
  std::string origin_;
  std::filesystem::path base_;
};

}  // namespace detail

/// Parses a JSON run configuration held in memory. `base` resolves relative
/// topology file references.
inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>",
                                   const std::filesystem::path& base = ".") {
  return detail::ConfigReader(text, origin, base).parse();
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace qtp
