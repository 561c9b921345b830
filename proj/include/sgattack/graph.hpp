#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "error.hpp"
#include "jsonlib.hpp"
#include "rng.hpp"

namespace sga {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using NodePair = std::pair<int, int>;

// Undirected signed edge, stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  int sign = 1;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected signed graph over nodes 0..n-1. Immutable once built.
//
// Edges are kept in canonical (u, v) order with u < v; every downstream
// matrix is indexed by these contiguous ids. labels()[i] is the original
// identifier of node i in the source file (or parent graph).
class SignedGraph {
 public:
  SignedGraph() = default;

  SignedGraph(int n, std::vector<Edge> edges, std::vector<std::int64_t> labels = {})
      : n_(n), edges_(std::move(edges)), labels_(std::move(labels)) {
    if (n_ < 0) throw InvalidArgument("negative node count");
    if (labels_.empty()) {
      labels_.resize(static_cast<std::size_t>(n_));
      std::iota(labels_.begin(), labels_.end(), std::int64_t{0});
    }
    if (labels_.size() != static_cast<std::size_t>(n_))
      throw InvalidArgument("label count does not match node count");
    for (auto& e : edges_) {
      if (e.u > e.v) std::swap(e.u, e.v);
      if (e.u < 0 || e.v >= n_) throw InvalidArgument("edge endpoint out of range");
      if (e.u == e.v) throw InvalidArgument("self-loop on node " + std::to_string(e.u));
      if (e.sign != 1 && e.sign != -1) throw InvalidArgument("edge sign must be +1 or -1");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    neighbors_.assign(static_cast<std::size_t>(n_), {});
    index_.reserve(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      if (!index_.emplace(key(e.u, e.v), i).second)
        throw InvalidArgument("duplicate edge " + std::to_string(e.u) + "-" + std::to_string(e.v));
      neighbors_[static_cast<std::size_t>(e.u)].push_back(e.v);
      neighbors_[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  int num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t i) const { return edges_.at(i); }
  const std::vector<std::int64_t>& labels() const noexcept { return labels_; }
  const std::vector<int>& neighbors(int u) const { return neighbors_.at(static_cast<std::size_t>(u)); }

  std::optional<std::size_t> find_edge(int u, int v) const {
    if (u > v) std::swap(u, v);
    auto it = index_.find(key(u, v));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Sign of the edge, 0 when absent.
  int sign(int u, int v) const {
    auto idx = find_edge(u, v);
    return idx ? edges_[*idx].sign : 0;
  }

  std::vector<int> signs() const {
    std::vector<int> s(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) s[i] = edges_[i].sign;
    return s;
  }

  std::size_t positive_edges() const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [](const Edge& e) { return e.sign > 0; }));
  }

  double positive_ratio() const {
    return edges_.empty() ? 0.0 : static_cast<double>(positive_edges()) / static_cast<double>(edges_.size());
  }

  std::vector<NodePair> pairs() const {
    std::vector<NodePair> p;
    p.reserve(edges_.size());
    for (const auto& e : edges_) p.emplace_back(e.u, e.v);
    return p;
  }

  // Dense symmetric signed adjacency A.
  Matrix adjacency() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) a(e.u, e.v) = a(e.v, e.u) = e.sign;
    return a;
  }

  // |A|.
  Matrix unsigned_adjacency() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) a(e.u, e.v) = a(e.v, e.u) = 1.0;
    return a;
  }

  // A+ = relu(A).
  Matrix positive_part() const { return adjacency().cwiseMax(0.0); }
  // A- = A+ - A.
  Matrix negative_part() const { return positive_part() - adjacency(); }

  Eigen::SparseMatrix<double> sparse_adjacency(bool signed_entries = true) const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * edges_.size());
    for (const auto& e : edges_) {
      const double w = signed_entries ? e.sign : 1.0;
      t.emplace_back(e.u, e.v, w);
      t.emplace_back(e.v, e.u, w);
    }
    Eigen::SparseMatrix<double> s(n_, n_);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }

  // d[i] = sum_j |A|[i, j].
  Vector unsigned_degrees() const {
    Vector d = Vector::Zero(n_);
    for (const auto& e : edges_) {
      d(e.u) += 1.0;
      d(e.v) += 1.0;
    }
    return d;
  }

  // Same topology, new signs (indexed like edges()).
  SignedGraph with_signs(const std::vector<int>& signs) const {
    if (signs.size() != edges_.size()) throw InvalidArgument("sign vector length mismatch");
    SignedGraph g = *this;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (signs[i] != 1 && signs[i] != -1) throw InvalidArgument("edge sign must be +1 or -1");
      g.edges_[i].sign = signs[i];
    }
    return g;
  }

  friend bool operator==(const SignedGraph& a, const SignedGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_ && a.labels_ == b.labels_;
  }

 private:
  static std::uint64_t key(int u, int v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> labels_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::vector<int>> neighbors_;
};

// Copy of g with the sign of edge (u, v) negated.
inline SignedGraph flip_sign(const SignedGraph& g, int u, int v) {
  auto idx = g.find_edge(u, v);
  if (!idx) throw MissingEdge(u, v);
  auto s = g.signs();
  s[*idx] = -s[*idx];
  return g.with_signs(s);
}

// Induced subgraph on `nodes`, relabeled 0..k-1 in ascending order of the
// given ids. Labels are inherited from g.
inline SignedGraph induced_subgraph(const SignedGraph& g, std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<int> remap(static_cast<std::size_t>(g.num_nodes()), -1);
  std::vector<std::int64_t> labels;
  labels.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    remap[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);
    labels.push_back(g.labels()[static_cast<std::size_t>(nodes[i])]);
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    const int a = remap[static_cast<std::size_t>(e.u)];
    const int b = remap[static_cast<std::size_t>(e.v)];
    if (a >= 0 && b >= 0) edges.push_back({a, b, e.sign});
  }
  return SignedGraph(static_cast<int>(nodes.size()), std::move(edges), std::move(labels));
}

// Connected components as sorted node lists, ordered by smallest member.
inline std::vector<std::vector<int>> connected_components(const SignedGraph& g) {
  const int n = g.num_nodes();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    stack.assign(1, s);
    comp[static_cast<std::size_t>(s)] = id;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      out.back().push_back(u);
      for (int w : g.neighbors(u)) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = id;
          stack.push_back(w);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

// Induced subgraph on the largest component. Equal sizes are broken by the
// smallest original label in the component.
inline SignedGraph largest_connected_component(const SignedGraph& g) {
  if (g.num_nodes() == 0) throw InvalidArgument("largest_connected_component on empty graph");
  const auto comps = connected_components(g);
  std::size_t best = 0;
  auto min_label = [&](const std::vector<int>& c) {
    std::int64_t m = g.labels()[static_cast<std::size_t>(c.front())];
    for (int u : c) m = std::min(m, g.labels()[static_cast<std::size_t>(u)]);
    return m;
  };
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].size() > comps[best].size() ||
        (comps[i].size() == comps[best].size() && min_label(comps[i]) < min_label(comps[best])))
      best = i;
  }
  if (comps[best].size() == static_cast<std::size_t>(g.num_nodes())) return g;
  return induced_subgraph(g, comps[best]);
}

inline bool is_connected(const SignedGraph& g) {
  return g.num_nodes() <= 1 || connected_components(g).size() == 1;
}

// ---------------------------------------------------------------------------
// Edge-list ingestion

enum class EdgeFormat { plain, rated };

struct LoadStats {
  std::size_t rows = 0;
  std::size_t zero_ratings = 0;     // rated rows with rating 0, rejected
  std::size_t self_loops = 0;       // dropped
  std::size_t zero_sum_pairs = 0;   // reciprocal rows whose ratings cancel, dropped
  std::size_t duplicate_rows = 0;   // directed rows overwritten by a later row
};

struct LoadResult {
  SignedGraph graph;
  LoadStats stats;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == '\t' || c == ' ' || c == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool parse_int(const std::string& s, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_real(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

}  // namespace detail

// Parses "u,v,s" (plain) or "u,v,rating[,time]" (rated) rows. A non-numeric
// first line is treated as a header. Directed duplicates keep the last row;
// reciprocal rows are merged by the sign of their rating sum.
inline LoadResult parse_edge_list(std::istream& in, EdgeFormat format) {
  LoadResult result;
  auto& stats = result.stats;
  std::map<std::pair<std::int64_t, std::int64_t>, double> directed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = detail::split_fields(line);
    if (fields.empty() || fields[0][0] == '#' || fields[0][0] == '%') continue;
    std::int64_t u = 0, v = 0;
    double w = 0.0;
    const bool ids_ok = fields.size() >= 3 && detail::parse_int(fields[0], u) && detail::parse_int(fields[1], v);
    if (!ids_ok) {
      if (lineno == 1 && stats.rows == 0) continue;  // header
      throw ParseError(lineno, "expected at least three numeric columns u,v,s");
    }
    if (!detail::parse_real(fields[2], w)) throw ParseError(lineno, "bad sign/rating '" + fields[2] + "'");
    if (format == EdgeFormat::plain) {
      if (fields.size() != 3) throw ParseError(lineno, "plain rows have exactly three columns");
      if (w != 1.0 && w != -1.0) throw ParseError(lineno, "plain sign must be +1 or -1");
    } else {
      if (fields.size() > 4) throw ParseError(lineno, "rated rows have three or four columns");
      if (fields.size() == 4) {
        double ts = 0.0;
        if (!detail::parse_real(fields[3], ts)) throw ParseError(lineno, "bad time column");
      }
      if (w == 0.0) {
        ++stats.zero_ratings;
        ++stats.rows;
        continue;
      }
    }
    ++stats.rows;
    if (u == v) {
      ++stats.self_loops;
      continue;
    }
    auto [it, inserted] = directed.insert_or_assign({u, v}, w);
    (void)it;
    if (!inserted) ++stats.duplicate_rows;
  }

  std::map<std::pair<std::int64_t, std::int64_t>, double> merged;
  for (const auto& [pair, w] : directed) {
    const auto key = std::minmax(pair.first, pair.second);
    merged[{key.first, key.second}] += w;
  }
  std::vector<std::int64_t> ids;
  for (const auto& [pair, w] : merged) {
    if (w == 0.0) continue;
    ids.push_back(pair.first);
    ids.push_back(pair.second);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto id_of = [&](std::int64_t x) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), x) - ids.begin());
  };
  std::vector<Edge> edges;
  edges.reserve(merged.size());
  for (const auto& [pair, w] : merged) {
    if (w == 0.0) {
      ++stats.zero_sum_pairs;
      continue;
    }
    edges.push_back({id_of(pair.first), id_of(pair.second), w > 0 ? 1 : -1});
  }
  const int n = static_cast<int>(ids.size());
  result.graph = SignedGraph(n, std::move(edges), std::move(ids));
  return result;
}

inline LoadResult load_edge_list(const std::string& path, EdgeFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_edge_list(in, format);
}

inline void write_edge_list(std::ostream& out, const SignedGraph& g) {
  for (const auto& e : g.edges()) out << e.u << ',' << e.v << ',' << (e.sign > 0 ? "1" : "-1") << '\n';
}

inline void write_edge_list(const std::string& path, const SignedGraph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_edge_list(out, g);
}

// {"n": int, "edges": [[u,v,s], ...]} in canonical (u, v) order, u < v.
inline Json to_json(const SignedGraph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u, e.v, e.sign});
  Json j{{"n", g.num_nodes()}, {"edges", std::move(edges)}};
  // original ids, omitted when they are just 0..n-1
  bool identity = true;
  for (std::size_t i = 0; i < g.labels().size(); ++i) identity = identity && g.labels()[i] == static_cast<std::int64_t>(i);
  if (!identity) j["labels"] = g.labels();
  return j;
}

inline SignedGraph graph_from_json(const Json& j) {
  if (!j.contains("n") || !j.contains("edges")) throw InvalidArgument("graph JSON needs 'n' and 'edges'");
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 3) throw InvalidArgument("graph JSON edge must be [u,v,s]");
    edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  }
  std::vector<std::int64_t> labels;
  if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::int64_t>>();
  return SignedGraph(j.at("n").get<int>(), std::move(edges), std::move(labels));
}

inline void save_graph_json(const std::string& path, const SignedGraph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(g).dump() << '\n';
}

inline SignedGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ParseError(0, std::string("invalid graph JSON: ") + e.what());
  }
  return graph_from_json(j);
}

// ---------------------------------------------------------------------------
// Splits and sampling

// E_s (train, signs visible) and E_o (test, signs hidden) as edge indices.
struct EdgeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<int> hidden_signs;  // ground-truth signs of `test`, evaluator only
};

inline EdgeSplit split_edges(const SignedGraph& g, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in (0, 1)");
  const std::size_t m = g.num_edges();
  const auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
  if (k == 0 || k >= m)
    throw InvalidArgument("test fraction " + std::to_string(test_fraction) + " gives " + std::to_string(k) +
                          " of " + std::to_string(m) + " edges");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  EdgeSplit s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  for (auto i : s.test) s.hidden_signs.push_back(g.edge(i).sign);
  return s;
}

inline std::vector<NodePair> edge_pairs(const SignedGraph& g, const std::vector<std::size_t>& idx) {
  std::vector<NodePair> p;
  p.reserve(idx.size());
  for (auto i : idx) p.emplace_back(g.edge(i).u, g.edge(i).v);
  return p;
}

// Adjacency as the analyst sees it: training signs, zeros on hidden test links.
inline Matrix observed_adjacency(const SignedGraph& g, const EdgeSplit& split) {
  Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
  for (auto i : split.train) {
    const auto& e = g.edge(i);
    a(e.u, e.v) = a(e.v, e.u) = e.sign;
  }
  return a;
}

struct GraphCorpus {
  std::vector<SignedGraph> graphs;
  std::string source;
  std::vector<int> sizes;
  int per_size = 0;
  std::uint64_t seed = 0;
};

inline std::vector<int> sample_nodes(int n, int k, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.uniform_index(static_cast<std::uint64_t>(n - i));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  all.resize(static_cast<std::size_t>(k));
  return all;
}

// For every size, per_size times: uniform node sample, induced subgraph, LCC.
inline GraphCorpus sample_subgraph_corpus(const SignedGraph& g, const std::vector<int>& sizes, int per_size,
                                          std::uint64_t seed, std::string source = {}) {
  for (int s : sizes)
    if (s <= 0 || s > g.num_nodes())
      throw InvalidArgument("sample size " + std::to_string(s) + " outside 1.." + std::to_string(g.num_nodes()));
  GraphCorpus c;
  c.source = std::move(source);
  c.sizes = sizes;
  c.per_size = per_size;
  c.seed = seed;
  Rng rng(seed);
  for (int s : sizes)
    for (int r = 0; r < per_size; ++r)
      c.graphs.push_back(largest_connected_component(induced_subgraph(g, sample_nodes(g.num_nodes(), s, rng))));
  return c;
}

// Breadth-first (snowball) sample of `size` nodes from a random start node,
// restarting from a fresh random node if the component runs out. Returns the
// LCC of the induced subgraph.
inline SignedGraph snowball_subsample(const SignedGraph& g, int size, std::uint64_t seed) {
  if (size <= 0 || size > g.num_nodes()) throw InvalidArgument("snowball size out of range");
  if (size == g.num_nodes()) return largest_connected_component(g);
  Rng rng(seed);
  std::vector<char> seen(static_cast<std::size_t>(g.num_nodes()), 0);
  std::vector<int> picked;
  while (static_cast<int>(picked.size()) < size) {
    int start = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(g.num_nodes())));
    while (seen[static_cast<std::size_t>(start)]) start = (start + 1) % g.num_nodes();
    std::vector<int> frontier{start};
    seen[static_cast<std::size_t>(start)] = 1;
    for (std::size_t head = 0; head < frontier.size() && static_cast<int>(picked.size()) < size; ++head) {
      const int u = frontier[head];
      picked.push_back(u);
      for (int w : g.neighbors(u)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          frontier.push_back(w);
        }
      }
    }
  }
  return largest_connected_component(induced_subgraph(g, picked));
}

}  // namespace sga
