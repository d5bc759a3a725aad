// qtpsim: command-line front end for the quantum transport simulator.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtp/qtp.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw qtp::Error(qtp::Errc::invalid_argument, "bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw qtp::Error(qtp::Errc::invalid_argument, "no seeds given");
  return seeds;
}

void report(const std::string& code, const std::string& message) {
  nlohmann::ordered_json e;
  e["error"] = code;
  e["message"] = message;
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slot-synchronous simulator for quantum data network transport protocols"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format = "both";
  auto* run = app.add_subcommand("run", "run one configuration");
  run->add_option("--config", config_path, "JSON run configuration")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--format", format, "tabular, records or both")->check(CLI::IsMember({"tabular", "records", "both"}));

  std::string preset_name, seeds_text = "1,2,3,4,5", preset_out, preset_format = "tabular";
  bool traces = false;
  auto* preset = app.add_subcommand("preset", "run an experiment preset over a seed list");
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_option("--seeds", seeds_text, "comma-separated seeds");
  preset->add_option("--out", preset_out, "output directory")->required();
  preset->add_option("--format", preset_format, "tabular, records or both")
      ->check(CLI::IsMember({"tabular", "records", "both"}));
  preset->add_flag("--traces", traces, "also write every run's full trace");

  int n_infra = 50;
  double degree = 4.0, alpha = 0.4, side = 100.0;
  std::uint64_t topo_seed = 0;
  int memory = 1000;
  std::string network = "TeleQDN", topo_out;
  auto* topo = app.add_subcommand("topology", "generate a Waxman topology document");
  topo->add_option("--n-infra", n_infra);
  topo->add_option("--degree", degree);
  topo->add_option("--alpha", alpha);
  topo->add_option("--side", side);
  topo->add_option("--seed", topo_seed)->required();
  topo->add_option("--memory", memory);
  topo->add_option("--network", network)->check(CLI::IsMember({"TeleQDN", "TagQdnR", "TagQdnS"}));
  topo->add_option("--out", topo_out, "output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      qtp::RunConfig cfg = qtp::parse_config(config_path);
      qtp::RunResult r = qtp::run(cfg);
      qtp::emit_run(r, out_dir, qtp::format_from_string(format));
      auto s = qtp::summarize(r);
      std::cout << "delivered " << s.throughput.total << " qubits in " << r.n_slots << " slots ("
                << qtp::format_real(s.throughput.per_slot) << " per slot)\n";
    } else if (*preset) {
      auto seeds = parse_seeds(seeds_text);
      auto o = qtp::run_preset(preset_name, seeds, std::filesystem::path(preset_out),
                               qtp::format_from_string(preset_format), traces);
      std::cout << qtp::to_csv(o.analysis);
    } else if (*topo) {
      qtp::WaxmanParams p;
      p.n_infra = n_infra;
      p.target_avg_degree = degree;
      p.alpha = alpha;
      p.area_side = side;
      p.seed = topo_seed;
      p.memory_capacity = memory;
      p.kind = qtp::network_kind_from_string(network);
      auto doc = qtp::to_json(qtp::generate_waxman(p)).dump(1) + "\n";
      if (topo_out.empty()) std::cout << doc;
      else qtp::write_file(topo_out, doc);
    }
  } catch (const qtp::Error& e) {
    report(std::string(qtp::to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
  return 0;
}
