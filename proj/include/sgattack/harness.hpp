#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "balance.hpp"
#include "detectors.hpp"
#include "graph.hpp"
#include "jsonlib.hpp"
#include "metrics.hpp"
#include "surrogate.hpp"

namespace sga::harness {

struct DatasetConfig {
  std::string path;  // empty: synthetic surrogate
  std::string format = "rated";  // rated | plain | json
  SurrogateParams synthetic{};
  std::uint64_t synthetic_seed = 7;
};

struct DetectorConfig {
  std::vector<int> corpus_sizes{1000, 1500, 2000, 2500, 3000, 3500};
  int reference_nodes = 3783;  // sizes are rescaled by n / reference_nodes
  int per_size = 10;
  double nu = 0.1;
  double gamma = 0.1;
  double t = 1.0;
  std::string strategy = "max";
  std::vector<double> powers{0.01, 0.05, 0.10, 0.15, 0.20};
  int attack_seeds = 5;
};

struct BenchConfig {
  int nodes = 500;
  int flips = 2;
  int repeats = 3;
  std::vector<std::string> targets{"pole-unsym", "pole-sym", "fextra-meta", "fextra-ols"};
};

struct ExperimentConfig {
  DatasetConfig dataset;
  int subsample = 300;  // 0 = full graph
  double test_fraction = 0.1;
  std::string target = "fextra-ols";
  std::string baseline;  // "", rand, greedy-triads
  std::vector<double> powers{0.01, 0.05, 0.10};
  attack::AttackConfig attack;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  DetectorConfig detector;
  BenchConfig bench;
  std::string out = "out";
};

namespace detail {

template <class T>
void read(const Json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void require_object(const Json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (c.subsample < 0) throw ConfigError("subsample must be >= 0");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!std::is_sorted(c.powers.begin(), c.powers.end())) throw ConfigError("powers must be sorted ascending");
  for (double p : c.powers)
    if (p < 0.0 || p > 1.0) throw ConfigError("powers must lie in [0, 1]");
  if (c.attack.lambda < 0.0 || c.attack.eta < 0.0) throw ConfigError("lambda and eta must be >= 0");
  if (!(c.attack.t > 0.0) || !(c.attack.pole_t > 0.0)) throw ConfigError("Markov times must be positive");
  try {
    attack::parse_target(c.target);
    detect::parse_strategy(c.detector.strategy);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!c.baseline.empty() && c.baseline != "rand" && c.baseline != "greedy-triads")
    throw ConfigError("baseline must be rand or greedy-triads");
  if (c.dataset.format != "rated" && c.dataset.format != "plain" && c.dataset.format != "json")
    throw ConfigError("dataset.format must be rated, plain or json");
  if (!c.dataset.path.empty() && !std::filesystem::exists(c.dataset.path))
    throw ConfigError("dataset file not found: " + c.dataset.path);
  if (c.detector.per_size < 1 || c.detector.attack_seeds < 1) throw ConfigError("detector counts must be positive");
  if (c.bench.nodes < 3 || c.bench.flips < 1 || c.bench.repeats < 1) throw ConfigError("bench settings out of range");
}

inline ExperimentConfig config_from_json(const Json& j) {
  using detail::read;
  detail::require_object(j, "config");
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::require_object(d, "dataset");
    read(d, "path", c.dataset.path);
    read(d, "format", c.dataset.format);
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    detail::require_object(s, "synthetic");
    read(s, "nodes", c.dataset.synthetic.nodes);
    read(s, "edges", c.dataset.synthetic.edges);
    read(s, "degree_exponent", c.dataset.synthetic.degree_exponent);
    read(s, "minority_share", c.dataset.synthetic.minority_share);
    read(s, "sign_noise", c.dataset.synthetic.sign_noise);
    read(s, "seed", c.dataset.synthetic_seed);
  }
  read(j, "subsample", c.subsample);
  read(j, "test_fraction", c.test_fraction);
  read(j, "target", c.target);
  read(j, "baseline", c.baseline);
  read(j, "powers", c.powers);
  read(j, "seeds", c.seeds);
  read(j, "out", c.out);
  read(j, "lambda", c.attack.lambda);
  read(j, "eta", c.attack.eta);
  read(j, "inner_L", c.attack.inner_L);
  read(j, "inner_lr", c.attack.inner_lr);
  read(j, "t", c.attack.t);
  read(j, "pole_t", c.attack.pole_t);
  read(j, "dim", c.attack.dim);
  c.attack.victim_pole.walk.t = c.attack.pole_t;
  std::string reduction = "sum";
  read(j, "reduction", reduction);
  if (reduction != "mean" && reduction != "sum") throw ConfigError("reduction must be mean or sum");
  c.attack.reduction = reduction == "sum" ? attack::Reduction::sum : attack::Reduction::mean;
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    detail::require_object(d, "detector");
    read(d, "corpus_sizes", c.detector.corpus_sizes);
    read(d, "reference_nodes", c.detector.reference_nodes);
    read(d, "per_size", c.detector.per_size);
    read(d, "nu", c.detector.nu);
    read(d, "gamma", c.detector.gamma);
    read(d, "t", c.detector.t);
    read(d, "strategy", c.detector.strategy);
    read(d, "powers", c.detector.powers);
    read(d, "attack_seeds", c.detector.attack_seeds);
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    detail::require_object(b, "bench");
    read(b, "nodes", c.bench.nodes);
    read(b, "flips", c.bench.flips);
    read(b, "repeats", c.bench.repeats);
    read(b, "targets", c.bench.targets);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return config_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// File helpers

// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

// ---------------------------------------------------------------------------
// Graph sources

inline SignedGraph load_graph(const std::string& path, const std::string& format, LoadStats* stats = nullptr) {
  if (format == "json") return load_graph_json(path);
  auto r = load_edge_list(path, format == "plain" ? EdgeFormat::plain : EdgeFormat::rated);
  if (stats) *stats = r.stats;
  return r.graph;
}

// LCC of the configured dataset, or of the seeded surrogate when no path is set.
inline SignedGraph load_base_graph(const DatasetConfig& d) {
  if (d.path.empty()) return generate_surrogate(d.synthetic, d.synthetic_seed);
  return largest_connected_component(load_graph(d.path, d.format));
}

inline SignedGraph trial_graph(const SignedGraph& base, int subsample, std::uint64_t seed) {
  if (subsample <= 0 || subsample >= base.num_nodes()) return base;
  return snowball_subsample(base, subsample, seed);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestResult {
  SignedGraph graph;
  LoadStats stats;
};

inline Json to_json(const IngestResult& r) {
  return {{"n", r.graph.num_nodes()},
          {"edges", r.graph.num_edges()},
          {"positive_ratio", r.graph.positive_ratio()},
          {"rows", r.stats.rows},
          {"zero_ratings", r.stats.zero_ratings},
          {"self_loops", r.stats.self_loops},
          {"zero_sum_pairs", r.stats.zero_sum_pairs},
          {"duplicate_rows", r.stats.duplicate_rows}};
}

inline IngestResult cmd_ingest(const std::string& input, const std::string& format, const std::string& out_dir) {
  IngestResult r;
  r.graph = largest_connected_component(load_graph(input, format, &r.stats));
  if (!out_dir.empty()) {
    write_file_atomic(std::filesystem::path(out_dir) / "graph.json", to_json(r.graph).dump() + "\n");
    write_file_atomic(std::filesystem::path(out_dir) / "stats.json", to_json(r).dump(2) + "\n");
  }
  return r;
}

// ---------------------------------------------------------------------------
// attack

struct AttackRow {
  std::uint64_t seed = 0;
  double power = 0.0;
  std::string attack;
  std::string model;
  double auc_clean = 0.0;
  double auc_poisoned = 0.0;
};

inline std::string attack_csv(const std::vector<AttackRow>& rows) {
  std::ostringstream s;
  s << "seed,power,attack,model,auc_clean,auc_poisoned\n";
  for (const auto& r : rows)
    s << r.seed << ',' << fmt(r.power) << ',' << r.attack << ',' << r.model << ',' << fmt(r.auc_clean) << ','
      << fmt(r.auc_poisoned) << '\n';
  return s.str();
}

inline std::vector<int> hidden_labels(const SignedGraph& g, const EdgeSplit& split) {
  std::vector<int> y;
  for (auto i : split.test) y.push_back(g.edge(i).sign > 0 ? 1 : 0);
  return y;
}

struct TrialResult {
  std::vector<AttackRow> rows;
  attack::AttackTrace trace;
};

// One seeded trial: split, self-train, attack, retrain the victim on every
// checkpoint graph and score it against the hidden test signs.
inline TrialResult run_attack_trial(const SignedGraph& g, const ExperimentConfig& c, std::uint64_t seed) {
  const auto target = attack::parse_target(c.target);
  const auto split = split_edges(g, c.test_fraction, seed);
  auto cfg = c.attack;
  cfg.seed = seed;
  cfg.checkpoints = c.powers;
  if (cfg.checkpoints.empty() || cfg.checkpoints.front() != 0.0) cfg.checkpoints.insert(cfg.checkpoints.begin(), 0.0);
  cfg.budget = attack::budget_for_power(cfg.checkpoints.back(), g.num_edges(), split.train.size());
  const auto truth = hidden_labels(g, split);
  const double clean = auc(attack::victim_predict(g, split, target, cfg), truth);
  TrialResult tr;
  if (c.baseline == "rand") {
    tr.trace = attack::baseline_rand(g, split, cfg.budget, seed, cfg.checkpoints);
  } else if (c.baseline == "greedy-triads") {
    tr.trace = attack::baseline_greedy_triads(g, split, cfg.budget, cfg.checkpoints);
  } else {
    tr.trace = attack::flip_attack(g, split, target, cfg);
  }
  const std::string model = attack::is_pole(target) ? "pole" : "fextra";
  for (const auto& s : tr.trace.snapshots) {
    const double p = s.flips == 0 ? clean : auc(attack::victim_predict(s.graph, split, target, cfg), truth);
    tr.rows.push_back({seed, s.power, tr.trace.attack, model, clean, p});
  }
  return tr;
}

inline std::vector<AttackRow> cmd_attack(const ExperimentConfig& c) {
  validate(c);
  const auto base = load_base_graph(c.dataset);
  const std::filesystem::path out(c.out);
  std::vector<AttackRow> rows;
  for (auto seed : c.seeds) {
    const auto g = trial_graph(base, c.subsample, seed);
    auto tr = run_attack_trial(g, c, seed);
    Json trace = attack::to_json(tr.trace);
    for (std::size_t k = 0; k < tr.trace.snapshots.size(); ++k) {
      const auto name = "poisoned_seed" + std::to_string(seed) + "_ckpt" + std::to_string(k) + ".json";
      write_file_atomic(out / name, to_json(tr.trace.snapshots[k].graph).dump() + "\n");
      trace["checkpoints"][k]["file"] = name;
    }
    write_file_atomic(out / ("clean_seed" + std::to_string(seed) + ".json"), to_json(g).dump() + "\n");
    write_file_atomic(out / ("trace_seed" + std::to_string(seed) + ".json"), trace.dump(2) + "\n");
    rows.insert(rows.end(), tr.rows.begin(), tr.rows.end());
    write_file_atomic(out / "attack.csv", attack_csv(rows));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// detect

struct DetectResult {
  detect::EvalReport report;
  std::map<std::string, double> strategy_auc;
  std::vector<detect::DetectorView> views;
  std::size_t clean = 0, poisoned = 0;
  std::vector<std::size_t> rejected;
};

inline std::vector<int> scaled_sizes(const DetectorConfig& d, int n) {
  std::vector<int> s;
  for (int size : d.corpus_sizes) {
    const double scaled = static_cast<double>(size) * n / std::max(1, d.reference_nodes);
    s.push_back(std::clamp(static_cast<int>(std::lround(scaled)), 3, n));
  }
  return s;
}

// Poisoned graphs: one attack run per seed on g, snapshotted at every power.
inline std::vector<SignedGraph> poisoned_set(const SignedGraph& g, const ExperimentConfig& c, std::uint64_t seed0) {
  const auto target = attack::parse_target(c.target);
  std::vector<SignedGraph> out;
  for (int s = 0; s < c.detector.attack_seeds; ++s) {
    const auto seed = seed0 + static_cast<std::uint64_t>(s);
    const auto split = split_edges(g, c.test_fraction, seed);
    auto cfg = c.attack;
    cfg.seed = seed;
    cfg.checkpoints = c.detector.powers;
    cfg.budget = attack::budget_for_power(cfg.checkpoints.back(), g.num_edges(), split.train.size());
    attack::AttackTrace tr;
    if (c.baseline == "rand")
      tr = attack::baseline_rand(g, split, cfg.budget, seed, cfg.checkpoints);
    else if (c.baseline == "greedy-triads")
      tr = attack::baseline_greedy_triads(g, split, cfg.budget, cfg.checkpoints);
    else
      tr = attack::flip_attack(g, split, target, cfg);
    for (auto& snap : tr.snapshots) out.push_back(std::move(snap.graph));
  }
  return out;
}

inline DetectResult run_detection(const std::vector<SignedGraph>& clean,
                                  const std::vector<SignedGraph>& poisoned, const DetectorConfig& d) {
  DetectResult r;
  const detect::OcsvmOptions opt{d.nu, d.gamma};
  std::vector<std::size_t> rej_metric, rej_tsvd;
  r.views.push_back(detect::fit_view(detect::ViewKind::metric, clean, d.t, opt, &rej_metric));
  r.views.push_back(detect::fit_view(detect::ViewKind::tsvd, clean, d.t, opt, &rej_tsvd));
  r.rejected = rej_metric;
  // graphs a view cannot featurize are left out of the evaluation set
  std::vector<SignedGraph> usable;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (!std::count(rej_metric.begin(), rej_metric.end(), i)) usable.push_back(clean[i]);
  const auto strategy = detect::parse_strategy(d.strategy);
  for (auto s : {detect::Strategy::mean, detect::Strategy::min, detect::Strategy::max}) {
    auto rep = detect::detector_eval(usable, poisoned, r.views, s);
    r.strategy_auc[detect::to_string(s)] = rep.auc;
    if (s == strategy) r.report = std::move(rep);
  }
  r.clean = usable.size();
  r.poisoned = poisoned.size();
  return r;
}

inline DetectResult cmd_detect(const ExperimentConfig& c) {
  validate(c);
  const auto base = load_base_graph(c.dataset);
  const auto seed = c.seeds.front();
  const auto g = trial_graph(base, c.subsample, seed);
  const auto corpus = sample_subgraph_corpus(g, scaled_sizes(c.detector, g.num_nodes()), c.detector.per_size, seed);
  const auto poisoned = poisoned_set(g, c, seed);
  auto r = run_detection(corpus.graphs, poisoned, c.detector);
  const std::filesystem::path out(c.out);
  std::ostringstream csv;
  detect::write_report_csv(csv, r.report);
  write_file_atomic(out / "detect_report.csv", csv.str());
  Json summary{{"clean", r.clean}, {"poisoned", r.poisoned}, {"rejected", r.rejected}, {"strategy_auc", r.strategy_auc}};
  for (std::size_t v = 0; v < r.views.size(); ++v) {
    summary["view_auc"][r.report.views[v]] = r.report.view_auc[v];
    write_file_atomic(out / ("model_" + r.report.views[v] + ".json"), detect::to_json(r.views[v].model).dump(2) + "\n");
  }
  write_file_atomic(out / "detect_summary.json", summary.dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  std::string attack;
  int n = 0;
  double seconds_per_flip = 0.0;
  double spread = 0.0;  // (max - min) / median over repeats
};

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream s;
  s << "attack,n,seconds_per_flip\n";
  for (const auto& r : rows) s << r.attack << ',' << r.n << ',' << fmt(r.seconds_per_flip) << '\n';
  return s.str();
}

// Seconds per perturbation step for each target on the same subsample.
inline std::vector<BenchRow> run_bench(const SignedGraph& g, const ExperimentConfig& c, std::uint64_t seed) {
  const auto split = split_edges(g, c.test_fraction, seed);
  std::vector<BenchRow> rows;
  for (const auto& name : c.bench.targets) {
    const auto target = attack::parse_target(name);
    auto cfg = c.attack;
    cfg.seed = seed;
    cfg.budget = static_cast<std::size_t>(c.bench.flips);
    const auto labels = attack::self_train_labels(g, split, target, cfg);
    std::vector<double> times;
    for (int r = 0; r < c.bench.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      attack::flip_attack(g, split, target, cfg, labels);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / c.bench.flips);
    }
    std::sort(times.begin(), times.end());
    const double med = times[times.size() / 2];
    rows.push_back({name, g.num_nodes(), med, (times.back() - times.front()) / med});
  }
  return rows;
}

inline std::vector<BenchRow> cmd_bench(const ExperimentConfig& c) {
  validate(c);
  const auto base = load_base_graph(c.dataset);
  const auto g = trial_graph(base, c.bench.nodes, c.seeds.front());
  auto rows = run_bench(g, c, c.seeds.front());
  write_file_atomic(std::filesystem::path(c.out) / "bench.csv", bench_csv(rows));
  return rows;
}

// ---------------------------------------------------------------------------
// metrics

inline balance::BalanceReport cmd_metrics(const std::string& graph_path, const std::string& format, double t) {
  return balance::balance_report(load_graph(graph_path, format), t);
}

}  // namespace sga::harness
