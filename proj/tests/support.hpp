#pragma once

#include <cstdint>
#include <vector>

#include "sgattack/graph.hpp"
#include "sgattack/rng.hpp"

namespace testing_support {

// G(n, p) with uniformly random signs.
inline sga::SignedGraph random_graph(int n, double p, std::uint64_t seed, double positive = 0.5) {
  sga::Rng rng(seed);
  std::vector<sga::Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform01() < p) e.push_back({u, v, rng.uniform01() < positive ? 1 : -1});
  return sga::SignedGraph(n, e);
}

// Connected version: a random spanning path is added first.
inline sga::SignedGraph random_connected_graph(int n, double p, std::uint64_t seed, double positive = 0.5) {
  sga::Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<std::vector<char>> has(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  std::vector<sga::Edge> e;
  auto add = [&](int u, int v) {
    if (u > v) std::swap(u, v);
    if (has[u][v]) return;
    has[u][v] = 1;
    e.push_back({u, v, rng.uniform01() < positive ? 1 : -1});
  };
  for (int i = 0; i + 1 < n; ++i) add(order[i], order[i + 1]);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform01() < p) add(u, v);
  return sga::SignedGraph(n, e);
}

// Two all-positive triangles {0,1,2} and {3,4,5} joined by the negative edge (2,3).
inline sga::SignedGraph two_triangles() {
  return sga::SignedGraph(6, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {3, 4, 1}, {3, 5, 1}, {4, 5, 1}, {2, 3, -1}});
}

inline sga::SignedGraph complete_graph(int n, int sign = 1) {
  std::vector<sga::Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) e.push_back({u, v, sign});
  return sga::SignedGraph(n, e);
}

inline sga::SignedGraph cycle(int n, const std::vector<int>& signs) {
  std::vector<sga::Edge> e;
  for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n, signs[static_cast<std::size_t>(i) % signs.size()]});
  return sga::SignedGraph(n, e);
}

// Graph with the nodes renamed by perm (node i becomes perm[i]).
inline sga::SignedGraph permuted(const sga::SignedGraph& g, const std::vector<int>& perm) {
  std::vector<sga::Edge> e;
  for (const auto& x : g.edges()) e.push_back({perm[x.u], perm[x.v], x.sign});
  return sga::SignedGraph(g.num_nodes(), e);
}

inline std::vector<int> random_permutation(int n, std::uint64_t seed) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  sga::Rng rng(seed);
  rng.shuffle(p);
  return p;
}

}  // namespace testing_support
