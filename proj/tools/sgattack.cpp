// Command-line driver: ingest, attack, detect, bench, metrics, synth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgattack/sgattack.hpp"

namespace {

enum Exit { ok = 0, io_failure = 1, config_failure = 2, numeric_failure = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> power, lambda, eta;
  std::optional<std::string> target, baseline;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "run a single seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--power", o.power, "single attack power (fraction of |E|)");
  cmd->add_option("--lambda", o.lambda, "weight of the balance-ratio penalty");
  cmd->add_option("--eta", o.eta, "weight of the polarization penalty");
  cmd->add_option("--target", o.target, "fextra-ols | fextra-meta | pole-sym | pole-unsym");
  cmd->add_option("--baseline", o.baseline, "rand | greedy-triads");
}

sga::harness::ExperimentConfig resolve(const Overrides& o) {
  auto c = o.config.empty() ? sga::harness::ExperimentConfig{} : sga::harness::load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) c.out = *o.out;
  if (o.power) c.powers = {*o.power};
  if (o.lambda) c.attack.lambda = *o.lambda;
  if (o.eta) c.attack.eta = *o.eta;
  if (o.target) c.target = *o.target;
  if (o.baseline) c.baseline = *o.baseline;
  sga::harness::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign-flip poisoning attacks and detectors for signed graphs"};
  app.require_subcommand(1);

  Overrides o;
  std::string input, format = "rated";
  double t = 1.0;

  auto* ingest = app.add_subcommand("ingest", "load an edge list, keep the LCC, dump graph.json + stats.json");
  ingest->add_option("input", input, "edge-list file")->required();
  ingest->add_option("--format", format, "rated | plain | json");
  add_common(ingest, o);

  auto* atk = app.add_subcommand("attack", "poisoning runs; writes attack.csv and traces");
  add_common(atk, o);
  auto* det = app.add_subcommand("detect", "fit detectors on a clean corpus and score poisoned graphs");
  add_common(det, o);
  auto* bench = app.add_subcommand("bench", "seconds per flip for each attack");
  add_common(bench, o);

  auto* metrics = app.add_subcommand("metrics", "balance report for a graph file");
  metrics->add_option("input", input, "graph file")->required();
  metrics->add_option("--format", format, "json | rated | plain");
  metrics->add_option("--t", t, "Markov time");
  add_common(metrics, o);

  int nodes = 0;
  auto* synth = app.add_subcommand("synth", "write the synthetic surrogate graph");
  synth->add_option("--nodes", nodes, "node count (default: config)");
  add_common(synth, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_failure;
  }

  try {
    if (ingest->parsed()) {
      const auto r = sga::harness::cmd_ingest(input, format, o.out.value_or(""));
      std::cout << "n=" << r.graph.num_nodes() << " edges=" << r.graph.num_edges()
                << " positive_ratio=" << sga::harness::fmt(r.graph.positive_ratio()) << "\n";
      std::cout << sga::harness::to_json(r).dump() << "\n";
    } else if (atk->parsed()) {
      const auto rows = sga::harness::cmd_attack(resolve(o));
      std::cout << sga::harness::attack_csv(rows);
    } else if (det->parsed()) {
      const auto r = sga::harness::cmd_detect(resolve(o));
      std::cout << "clean=" << r.clean << " poisoned=" << r.poisoned << "\n";
      for (std::size_t v = 0; v < r.report.views.size(); ++v)
        std::cout << r.report.views[v] << " auc=" << sga::harness::fmt(r.report.view_auc[v]) << "\n";
      for (const auto& [s, a] : r.strategy_auc) std::cout << "ensemble-" << s << " auc=" << sga::harness::fmt(a) << "\n";
    } else if (bench->parsed()) {
      const auto rows = sga::harness::cmd_bench(resolve(o));
      std::cout << sga::harness::bench_csv(rows);
    } else if (metrics->parsed()) {
      const auto rep = sga::harness::cmd_metrics(input, format, t);
      const auto text = sga::balance::to_json(rep).dump(2) + "\n";
      if (o.out) {
        sga::harness::write_file_atomic(std::filesystem::path(*o.out) / "metrics.json", text);
      }
      std::cout << text;
    } else if (synth->parsed()) {
      auto c = resolve(o);
      if (nodes > 0) {
        const double density = static_cast<double>(c.dataset.synthetic.edges) / c.dataset.synthetic.nodes;
        c.dataset.synthetic.nodes = nodes;
        c.dataset.synthetic.edges = static_cast<std::size_t>(density * nodes);
      }
      const auto g = sga::generate_surrogate(c.dataset.synthetic, c.dataset.synthetic_seed);
      sga::harness::write_file_atomic(std::filesystem::path(c.out) / "synthetic.json", sga::to_json(g).dump() + "\n");
      std::cout << "n=" << g.num_nodes() << " edges=" << g.num_edges()
                << " positive_ratio=" << sga::harness::fmt(g.positive_ratio()) << "\n";
    }
  } catch (const sga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_failure;
  } catch (const sga::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_failure;
  } catch (const sga::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return numeric_failure;
  } catch (const sga::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_failure;
  }
  return ok;
}
