#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace sga {

// Parameters for a synthetic trust network: heavy-tailed degrees
// (Chung-Lu weights) and signs drawn from a two-faction model. A small
// "minority" faction is distrusted by, and distrusts, the majority; each
// sign is then flipped independently with probability sign_noise.
//
// Defaults approximate the Bitcoin-Alpha statistics (3783 nodes, 24186
// edges, 92% positive) and are used when the real dataset is not available.
struct SurrogateParams {
  int nodes = 3783;
  std::size_t edges = 24186;
  double degree_exponent = 2.1;
  double minority_share = 0.035;
  double sign_noise = 0.02;
};

inline SignedGraph generate_surrogate(const SurrogateParams& p, std::uint64_t seed) {
  if (p.nodes < 2) throw InvalidArgument("surrogate needs at least two nodes");
  const auto max_edges = static_cast<std::size_t>(p.nodes) * static_cast<std::size_t>(p.nodes - 1) / 2;
  if (p.edges > max_edges / 2) throw InvalidArgument("surrogate edge count too dense for sampling");
  if (p.degree_exponent <= 1.0) throw InvalidArgument("degree exponent must exceed 1");
  Rng rng(seed);

  std::vector<double> cumulative(static_cast<std::size_t>(p.nodes));
  double total = 0.0;
  const double alpha = 1.0 / (p.degree_exponent - 1.0);
  for (int i = 0; i < p.nodes; ++i) {
    total += std::pow(static_cast<double>(i) + 4.0, -alpha);
    cumulative[static_cast<std::size_t>(i)] = total;
  }
  // Random rank -> node assignment so hubs are not always low ids.
  std::vector<int> node_of_rank(static_cast<std::size_t>(p.nodes));
  for (int i = 0; i < p.nodes; ++i) node_of_rank[static_cast<std::size_t>(i)] = i;
  rng.shuffle(node_of_rank);
  auto draw = [&]() {
    const double x = rng.uniform01() * total;
    const auto r = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) -
                                            cumulative.begin());
    return node_of_rank[std::min(r, cumulative.size() - 1)];
  };

  std::vector<char> minority(static_cast<std::size_t>(p.nodes));
  for (auto& m : minority) m = rng.uniform01() < p.minority_share ? 1 : 0;

  std::unordered_set<std::uint64_t> seen;
  std::vector<Edge> edges;
  edges.reserve(p.edges);
  while (edges.size() < p.edges) {
    int u = draw(), v = draw();
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    const auto key = static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(p.nodes) + static_cast<std::uint64_t>(v);
    if (!seen.insert(key).second) continue;
    int sign = minority[static_cast<std::size_t>(u)] == minority[static_cast<std::size_t>(v)] ? 1 : -1;
    if (rng.uniform01() < p.sign_noise) sign = -sign;
    edges.push_back({u, v, sign});
  }
  return largest_connected_component(SignedGraph(p.nodes, std::move(edges)));
}

}  // namespace sga
