#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qtp/engine.hpp"
#include "qtp/error.hpp"
#include "qtp/metrics.hpp"

namespace qtp {

enum class Format { Tabular, Records, Both };

inline Format format_from_string(std::string_view s) {
  if (s == "tabular") return Format::Tabular;
  if (s == "records") return Format::Records;
  if (s == "both") return Format::Both;
  throw Error(Errc::invalid_argument, "unknown format '" + std::string(s) + "'");
}

inline bool wants_tabular(Format f) { return f != Format::Records; }
inline bool wants_records(Format f) { return f != Format::Tabular; }

using Cell = std::variant<std::int64_t, double, std::string>;

/// Six significant digits, so output bytes do not depend on the platform's
/// shortest round-trip formatting.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string to_text(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
  return std::get<std::string>(c);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != header.size()) throw Error(Errc::invalid_argument, "row width does not match header");
    rows.push_back(std::move(row));
  }
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_field(t.header[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(to_text(row[i]));
    out += '\n';
  }
  return out;
}

/// One JSON object per row; reals are written with the same six digits as the
/// tabular form (as raw JSON numbers).
inline std::string to_ndjson(const Table& t, const std::string& type) {
  std::string out;
  for (const auto& row : t.rows) {
    std::string line = "{\"type\":" + nlohmann::json(type).dump();
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += "," + nlohmann::json(t.header[i]).dump() + ":";
      if (const auto* d = std::get_if<double>(&row[i]))
        line += std::isfinite(*d) ? format_real(*d) : "null";
      else if (const auto* n = std::get_if<std::int64_t>(&row[i]))
        line += std::to_string(*n);
      else
        line += nlohmann::json(std::get<std::string>(row[i])).dump();
    }
    out += line + "}\n";
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Run tables

inline Table flow_table(const RunResult& r) {
  Table t{{"slot", "session", "hop", "hops", "sender", "receiver", "announced", "ce", "granted", "delivered",
           "phase", "first_sent", "second_sent", "losses", "stored"},
          {}};
  for (const auto& rec : r.trace)
    for (const auto& f : rec.flows)
      t.add({std::int64_t{f.slot}, std::int64_t{f.session}, std::int64_t{f.hop}, std::int64_t{f.hops},
             std::int64_t{f.sender.index}, std::int64_t{f.receiver.index}, std::int64_t{f.announced},
             std::int64_t{f.ce}, std::int64_t{f.granted}, f.delivered, std::string(to_string(f.phase)),
             std::int64_t{f.first_sent}, std::int64_t{f.second_sent}, std::int64_t{f.losses},
             std::int64_t{f.stored}});
  return t;
}

inline Table pool_table(const RunResult& r) {
  Table t{{"slot", "node", "pool", "reserved", "capacity"}, {}};
  for (const auto& rec : r.trace)
    for (const auto& p : rec.pools)
      t.add({std::int64_t{p.slot}, std::int64_t{p.node.index}, std::string(to_string(p.pool)), p.reserved,
             p.capacity});
  return t;
}

inline Table session_table(const RunResult& r) {
  Table t{{"session", "src", "dst", "qubits", "start_slot", "hops", "path", "delivered"}, {}};
  for (const auto& s : r.sessions) {
    std::string path;
    for (std::size_t i = 0; i < s.path.size(); ++i) path += (i ? " " : "") + std::to_string(s.path[i].index);
    t.add({std::int64_t{s.id}, std::int64_t{s.src.index}, std::int64_t{s.dst.index},
           s.qubits ? Cell{*s.qubits} : Cell{std::string("inf")}, std::int64_t{s.start_slot},
           std::int64_t(s.path.empty() ? 0 : s.path.size() - 1), path, s.delivered});
  }
  return t;
}

struct RunSummary {
  std::int64_t sessions = 0;
  ThroughputReport throughput;
  double mean_window = std::nan("");
  double jain = std::nan("");
  double mean_utilization = std::nan("");
};

inline RunSummary summarize(const RunResult& r) {
  RunSummary s;
  s.sessions = static_cast<std::int64_t>(r.sessions.size());
  s.throughput = throughput(r);
  std::vector<double> means;
  for (const auto& [_, series] : window_series(r)) means.push_back(mean(series));
  if (!means.empty()) {
    s.mean_window = mean(means);
    try {
      s.jain = jain(means);
    } catch (const Error&) {
    }
  }
  double used = 0, cap = 0;
  for (const auto& rec : r.trace)
    for (const auto& p : rec.pools) {
      used += static_cast<double>(p.reserved);
      cap += static_cast<double>(p.capacity);
    }
  if (cap > 0) s.mean_utilization = used / cap;
  return s;
}

inline const std::vector<std::string>& summary_header() {
  static const std::vector<std::string> h{"protocol",  "network",      "seed",          "n_slots",
                                          "slot_length", "p",          "sessions",      "delivered",
                                          "per_slot",  "per_time",     "mean_window",   "jain",
                                          "mean_utilization"};
  return h;
}

inline std::vector<Cell> summary_row(const RunResult& r) {
  auto s = summarize(r);
  return {std::string(to_string(r.protocol)), std::string(to_string(r.network)), static_cast<std::int64_t>(r.seed),
          std::int64_t{r.n_slots}, r.slot_length, r.p, s.sessions, s.throughput.total, s.throughput.per_slot,
          s.throughput.per_time, s.mean_window, s.jain, s.mean_utilization};
}

/// Writes a run's trace and summary under `dir`.
inline std::vector<std::filesystem::path> emit_run(const RunResult& r, const std::filesystem::path& dir, Format f) {
  std::vector<std::filesystem::path> written;
  Table summary{summary_header(), {}};
  summary.add(summary_row(r));
  auto put = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    written.push_back(dir / name);
  };
  if (wants_tabular(f)) {
    put("flows.csv", to_csv(flow_table(r)));
    put("pools.csv", to_csv(pool_table(r)));
    put("sessions.csv", to_csv(session_table(r)));
    put("summary.csv", to_csv(summary));
  }
  if (wants_records(f)) {
    put("trace.ndjson", to_ndjson(session_table(r), "session") + to_ndjson(flow_table(r), "flow") +
                            to_ndjson(pool_table(r), "pool") + to_ndjson(summary, "summary"));
  }
  return written;
}

}  // namespace qtp
