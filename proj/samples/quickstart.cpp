// Poison a small synthetic trust network with the OLS flip attack and
// compare the victim's test AUC and the graph's balance before and after.

#include <iostream>

#include "sgattack/sgattack.hpp"

int main() {
  using namespace sga;
  const auto g = snowball_subsample(generate_surrogate({}, 7), 300, 1);
  const auto split = split_edges(g, 0.1, 1);
  std::vector<int> truth;
  for (auto i : split.test) truth.push_back(g.edge(i).sign > 0);

  attack::AttackConfig cfg;
  cfg.seed = 1;
  cfg.budget = attack::budget_for_power(0.05, g.num_edges(), split.train.size());
  const auto trace = attack::flip_attack(g, split, attack::Target::fextra_ols, cfg);

  const auto test = edge_pairs(g, split.test);
  std::cout << "nodes " << g.num_nodes() << ", edges " << g.num_edges() << ", flips " << trace.flips.size() << "\n";
  std::cout << "test AUC  " << auc(fextra::fextra_predict(g, split, test), truth) << " -> "
            << auc(fextra::fextra_predict(trace.poisoned, split, test), truth) << "\n";
  std::cout << "T(G)      " << balance::balance_ratio(g) << " -> " << balance::balance_ratio(trace.poisoned) << "\n";
  std::cout << "Pol(G,1)  " << balance::graph_polarization(g, 1.0) << " -> "
            << balance::graph_polarization(trace.poisoned, 1.0) << "\n";
}
