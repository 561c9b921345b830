#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sgattack/attacks.hpp"
#include "sgattack/numerics/grad_check.hpp"
#include "support.hpp"

using namespace sga;
using namespace sga::attack;
using testing_support::random_connected_graph;

namespace {

// Mostly balanced two-community graph so the victims have signal to lose.
SignedGraph community_graph(int n, double p, std::uint64_t seed, double noise = 0.05) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      if (v != u + 1 && !(rng.uniform01() < p)) continue;
      int s = (u < n / 2) == (v < n / 2) ? 1 : -1;
      if (rng.uniform01() < noise) s = -s;
      e.push_back({u, v, s});
    }
  return SignedGraph(n, e);
}

std::vector<std::pair<int, int>> train_entries(const SignedGraph& g, const EdgeSplit& split) {
  std::vector<std::pair<int, int>> out;
  for (auto i : split.train) {
    out.emplace_back(g.edge(i).u, g.edge(i).v);
    out.emplace_back(g.edge(i).v, g.edge(i).u);
  }
  return out;
}

void check_trace_invariants(const SignedGraph& g0, const EdgeSplit& split, const AttackTrace& tr) {
  EXPECT_DOUBLE_EQ((tr.poisoned.adjacency() - g0.adjacency()).cwiseAbs().sum() / 4.0, static_cast<double>(tr.flips.size()));
  EXPECT_EQ(tr.poisoned.unsigned_degrees(), g0.unsigned_degrees());
  EXPECT_EQ(tr.poisoned.unsigned_adjacency(), g0.unsigned_adjacency());
  std::set<std::size_t> seen;
  const std::set<std::size_t> train(split.train.begin(), split.train.end());
  for (auto i : tr.pool) {
    EXPECT_TRUE(seen.insert(i).second);
    EXPECT_TRUE(train.count(i));
  }
  for (auto i : split.test) EXPECT_EQ(tr.poisoned.edge(i).sign, g0.edge(i).sign);
}

}  // namespace

TEST(Targets, ParseRoundTrip) {
  for (auto t : {Target::fextra_ols, Target::fextra_meta, Target::pole_sym, Target::pole_unsym})
    EXPECT_EQ(parse_target(to_string(t)), t);
  EXPECT_THROW(parse_target("pole"), InvalidArgument);
  AttackConfig c;
  EXPECT_EQ(inner_iterations(c, Target::fextra_meta), 100);
  EXPECT_EQ(inner_iterations(c, Target::pole_sym), 50);
  c.inner_L = 7;
  EXPECT_EQ(inner_iterations(c, Target::pole_sym), 7);
}

TEST(Budget, PowerRoundingAndCap) {
  EXPECT_EQ(budget_for_power(0.1, 24186, 20000), 2419u);
  EXPECT_EQ(budget_for_power(0.5, 100, 40), 40u);
  EXPECT_EQ(budget_for_power(0.0, 100, 90), 0u);
  EXPECT_THROW(budget_for_power(-0.1, 100, 90), InvalidArgument);
}

TEST(SelfTrain, TieGoesPositive) {
  EXPECT_EQ(threshold_labels(Vector::Constant(4, 0.5)), (std::vector<int>{1, 1, 1, 1}));
  Vector p(3);
  p << 0.49, 0.51, 0.0;
  EXPECT_EQ(threshold_labels(p), (std::vector<int>{0, 1, 0}));
}

TEST(SelfTrain, AccurateVictimReproducesHiddenLabels) {
  const auto g = community_graph(60, 0.2, 2, 0.0);
  const auto split = split_edges(g, 0.1, 1);
  const auto y = self_train_labels(g, split, Target::fextra_ols, {});
  EXPECT_EQ(y.values, threshold_labels(victim_predict(g, split, Target::fextra_ols, {})));
  int agree = 0;
  for (std::size_t k = 0; k < y.values.size(); ++k) agree += y.values[k] == (split.hidden_signs[k] > 0);
  EXPECT_GE(agree, 0.95 * static_cast<double>(y.values.size()));
  EXPECT_EQ(y.role, fextra::LabelRole::self_trained);
}

TEST(Loss, LikelihoodExamples) {
  ad::Tape t;
  const Vector ones = Vector::Ones(5);
  EXPECT_NEAR(log_likelihood(t, t.constant(Vector::Constant(5, 0.5)), ones, Reduction::sum).scalar(), 5 * std::log(0.5), 1e-14);
  EXPECT_NEAR(log_likelihood(t, t.constant(Vector::Constant(5, 0.5)), ones, Reduction::mean).scalar(), std::log(0.5), 1e-14);
  EXPECT_NEAR(log_likelihood(t, t.constant(Vector::Constant(5, 0.9)), ones, Reduction::sum).scalar(), 5 * std::log(0.9), 1e-14);
  EXPECT_NEAR(log_likelihood(t, t.constant(Vector::Constant(5, 0.1)), Vector::Zero(5), Reduction::sum).scalar(), 5 * std::log(0.9), 1e-14);
  const double clipped = log_likelihood(t, t.constant(Vector::Ones(5)), ones, Reduction::sum).scalar();
  EXPECT_LE(clipped, 0.0);
  EXPECT_NEAR(clipped, 0.0, 1e-10);
  EXPECT_TRUE(std::isfinite(log_likelihood(t, t.constant(Vector::Zero(5)), ones, Reduction::sum).scalar()));
}

TEST(Loss, PoleSymEqualsUnsymOnRegularCycle) {
  const auto g = testing_support::cycle(8, {1, 1, -1, 1, -1, 1, 1, 1});
  const auto split = split_edges(g, 0.25, 3);
  AttackConfig c;
  c.dim = 4;
  c.inner_L = 20;
  const fextra::LabelVector y{std::vector<int>(split.test.size(), 1)};
  const auto ps = make_problem(g, split, y, Target::pole_sym, c);
  const auto pu = make_problem(g, split, y, Target::pole_unsym, c);
  ad::Tape t1, t2;
  // The observed graph is not regular, so compare on the full signed cycle.
  const double ls = attack_loss(t1, t1.constant(g.adjacency()), ps).scalar();
  const double lu = attack_loss(t2, t2.constant(g.adjacency()), pu).scalar();
  EXPECT_NEAR(ls, lu, 1e-6);
}

TEST(Loss, OlsGradientPassesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = community_graph(12, 0.4, s, 0.15);
    const auto split = split_edges(g, 0.2, s);
    AttackConfig c;
    c.seed = s;
    const auto prob = make_problem(g, split, self_train_labels(g, split, Target::fextra_ols, c), Target::fextra_ols, c);
    auto f = [&](ad::Tape& t, ad::Var x) { return attack_loss(t, x, prob); };
    const auto r = ad::grad_check(f, observed_adjacency(g, split), 1e-6, train_entries(g, split));
    EXPECT_LT(r.max_rel_error, 1e-3) << "seed " << s;
  }
}

TEST(Loss, MetaGradientPassesFiniteDifferences) {
  const auto g = community_graph(12, 0.4, 4, 0.15);
  const auto split = split_edges(g, 0.2, 4);
  AttackConfig c;
  c.inner_L = 30;
  c.inner_lr = 0.5;
  const auto prob = make_problem(g, split, self_train_labels(g, split, Target::fextra_meta, c), Target::fextra_meta, c);
  auto f = [&](ad::Tape& t, ad::Var x) { return attack_loss(t, x, prob); };
  EXPECT_LT(ad::grad_check(f, observed_adjacency(g, split), 1e-6, train_entries(g, split)).max_rel_error, 1e-3);
}

TEST(Loss, PoleSymGradientPassesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto g = community_graph(10, 0.4, s, 0.15);
    const auto split = split_edges(g, 0.2, s);
    AttackConfig c;
    c.seed = s;
    c.dim = 4;
    c.inner_L = 20;
    const auto prob = make_problem(g, split, self_train_labels(g, split, Target::pole_sym, c), Target::pole_sym, c);
    // the symmetric exponential reads one triangle, so probe symmetric moves
    auto f = [&](ad::Tape& t, ad::Var x) { return attack_loss(t, ad::symmetrize(x), prob); };
    EXPECT_LT(ad::grad_check(f, observed_adjacency(g, split), 1e-6, train_entries(g, split)).max_rel_error, 1e-3)
        << "seed " << s;
  }
}

TEST(Penalty, ZeroWeightsRecoverBaseBitForBit) {
  const auto g = community_graph(15, 0.3, 1);
  const auto split = split_edges(g, 0.2, 1);
  const auto prob = make_problem(g, split, self_train_labels(g, split, Target::fextra_ols, {}), Target::fextra_ols, {});
  ad::Tape t1, t2;
  const ad::Var x1 = t1.variable(observed_adjacency(g, split));
  const ad::Var x2 = t2.variable(observed_adjacency(g, split));
  const ad::Var base = ad::neg(attack_loss(t1, x1, prob));
  const ad::Var pen = penalized_loss(t2, ad::neg(attack_loss(t2, x2, prob)), x2, 0.0, 0.0, 1.0);
  EXPECT_EQ(base.scalar(), pen.scalar());
  t1.backward(base);
  t2.backward(pen);
  EXPECT_EQ(t1.gradient(x1), t2.gradient(x2));
  EXPECT_THROW(penalized_loss(t2, base, x2, -1.0, 0.0, 1.0), InvalidArgument);
}

TEST(Penalty, TriangleBalanceTerm) {
  ad::Tape t;
  const ad::Var x = t.constant(testing_support::complete_graph(3).adjacency());
  const ad::Var base = t.constant(Matrix::Constant(1, 1, 0.25));
  EXPECT_NEAR(penalized_loss(t, base, x, 1.0, 0.0, 1.0).scalar(), 1.25, 1e-14);
  std::vector<std::string> log;
  const ad::Var path = t.constant(SignedGraph(3, {{0, 1, 1}, {1, 2, 1}}).adjacency());
  EXPECT_EQ(penalized_loss(t, base, path, 1.0, 0.0, 1.0, &log).scalar(), 0.25);
  EXPECT_EQ(log.size(), 1u);
  const ad::Var all_pos = t.constant(testing_support::complete_graph(4).adjacency());
  EXPECT_NEAR(penalized_loss(t, base, all_pos, 0.0, 2.0, 1.0).scalar(), 2.25, 1e-9);
}

TEST(FlipAttack, ZeroBudgetReturnsCleanGraph) {
  const auto g = community_graph(20, 0.3, 5);
  const auto split = split_edges(g, 0.2, 5);
  AttackConfig c;
  c.checkpoints = {0.0};
  const auto tr = flip_attack(g, split, Target::fextra_ols, c);
  EXPECT_EQ(tr.poisoned, g);
  EXPECT_TRUE(tr.flips.empty());
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_EQ(tr.snapshots[0].graph, g);
}

TEST(FlipAttack, FullBudgetFlipsEveryTrainingLinkOnce) {
  const auto g = community_graph(12, 0.3, 6);
  const auto split = split_edges(g, 0.2, 6);
  AttackConfig c;
  c.budget = split.train.size();
  const auto tr = flip_attack(g, split, Target::fextra_ols, c);
  ASSERT_EQ(tr.flips.size(), split.train.size());
  check_trace_invariants(g, split, tr);
  for (auto i : split.train) EXPECT_EQ(tr.poisoned.edge(i).sign, -g.edge(i).sign);
  c.budget = split.train.size() + 1;
  EXPECT_THROW(flip_attack(g, split, Target::fextra_ols, c), InvalidArgument);
}

TEST(FlipAttack, GreedyFlipMaximizesFirstOrderScore) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = community_graph(12, 0.45, s, 0.1);
    const auto split = split_edges(g, 0.2, s);
    AttackConfig c;
    c.budget = 3;
    c.seed = s;
    const auto y = self_train_labels(g, split, Target::fextra_ols, c);
    const auto tr = flip_attack(g, split, Target::fextra_ols, c, y);
    const auto prob = make_problem(g, split, y, Target::fextra_ols, c);
    SignedGraph cur = g;
    std::set<std::size_t> pool;
    for (const auto& f : tr.flips) {
      const Matrix grad = ad::tape_gradient([&](ad::Tape& t, ad::Var x) { return attack_objective(t, x, prob); },
                                            observed_adjacency(cur, split));
      std::vector<std::size_t> open;
      for (auto i : split.train)
        if (!pool.count(i)) open.push_back(i);
      const auto scores = flip_scores(grad, cur, open);
      const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
      const auto chosen = *cur.find_edge(f.u, f.v);
      EXPECT_EQ(open[best], chosen) << "seed " << s << " step " << f.step;
      EXPECT_NEAR(f.gain, scores[best], 1e-12);
      pool.insert(chosen);
      cur = flip_sign(cur, f.u, f.v);
    }
  }
}

// Fails: a flip crosses the relu kink of the features, so the first-order
// score ranks only about half of the steps in the exact top three.
TEST(FlipAttack, DISABLED_GreedyFlipIsTopThreeAmongExactSingleFlips) {
  const auto g = community_graph(12, 0.45, 7, 0.1);
  const auto split = split_edges(g, 0.2, 7);
  AttackConfig c;
  c.budget = 3;
  const auto y = self_train_labels(g, split, Target::fextra_ols, c);
  const auto tr = flip_attack(g, split, Target::fextra_ols, c, y);
  const auto prob = make_problem(g, split, y, Target::fextra_ols, c);
  SignedGraph cur = g;
  std::set<std::size_t> pool;
  for (const auto& f : tr.flips) {
    const double now = attack_objective_value(observed_adjacency(cur, split), prob);
    std::vector<std::pair<double, std::size_t>> gains;
    for (auto i : split.train) {
      if (pool.count(i)) continue;
      const auto& e = cur.edge(i);
      gains.emplace_back(attack_objective_value(observed_adjacency(flip_sign(cur, e.u, e.v), split), prob) - now, i);
    }
    std::sort(gains.rbegin(), gains.rend());
    const auto chosen = *cur.find_edge(f.u, f.v);
    bool top3 = false;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, gains.size()); ++k) top3 = top3 || gains[k].second == chosen;
    std::size_t rank = 0;
    while (rank < gains.size() && gains[rank].second != chosen) ++rank;
    EXPECT_TRUE(top3) << "step " << f.step << " rank " << rank << " of " << gains.size() << " gain "
                      << gains[rank].first << " best " << gains[0].first;
    pool.insert(chosen);
    cur = flip_sign(cur, f.u, f.v);
  }
}

TEST(FlipAttack, ZeroPenaltiesGiveIdenticalFlipSequence) {
  const auto g = community_graph(25, 0.25, 8);
  const auto split = split_edges(g, 0.1, 8);
  AttackConfig plain;
  plain.budget = 5;
  AttackConfig zero = plain;
  zero.lambda = 0.0;
  zero.eta = 0.0;
  const auto a = flip_attack(g, split, Target::fextra_ols, plain);
  const auto b = flip_attack(g, split, Target::fextra_ols, zero);
  ASSERT_EQ(a.flips.size(), b.flips.size());
  for (std::size_t i = 0; i < a.flips.size(); ++i) {
    EXPECT_EQ(a.flips[i].u, b.flips[i].u);
    EXPECT_EQ(a.flips[i].v, b.flips[i].v);
    EXPECT_EQ(a.flips[i].gain, b.flips[i].gain);
  }
  EXPECT_EQ(a.loss_curve, b.loss_curve);
}

TEST(FlipAttack, InvariantsHoldForEveryTarget) {
  const auto g = community_graph(16, 0.35, 9);
  const auto split = split_edges(g, 0.15, 9);
  for (auto target : {Target::fextra_ols, Target::fextra_meta, Target::pole_sym, Target::pole_unsym}) {
    AttackConfig c;
    c.budget = 3;
    c.dim = 8;
    c.inner_L = 10;
    c.checkpoints = {0.0, 0.05, 0.1};
    c.lambda = 0.5;
    c.eta = 0.5;
    const auto tr = flip_attack(g, split, target, c);
    EXPECT_EQ(tr.flips.size(), 3u) << to_string(target);
    EXPECT_EQ(tr.loss_curve.size(), 3u);
    check_trace_invariants(g, split, tr);
    for (const auto& s : tr.snapshots) {
      EXPECT_DOUBLE_EQ((s.graph.adjacency() - g.adjacency()).cwiseAbs().sum() / 4.0, static_cast<double>(s.flips));
    }
  }
}

TEST(Rand, DeterministicAndComplete) {
  const auto g = community_graph(20, 0.3, 10);
  const auto split = split_edges(g, 0.2, 10);
  const auto a = baseline_rand(g, split, 6, 3), b = baseline_rand(g, split, 6, 3);
  EXPECT_EQ(a.pool, b.pool);
  check_trace_invariants(g, split, a);
  const auto all = baseline_rand(g, split, split.train.size(), 1);
  for (auto i : split.train) EXPECT_EQ(all.poisoned.edge(i).sign, -g.edge(i).sign);
  EXPECT_THROW(baseline_rand(g, split, split.train.size() + 1, 1), InvalidArgument);
}

TEST(GreedyTriads, CompleteGraphTieBreak) {
  const auto g = testing_support::complete_graph(4);
  EdgeSplit split;
  for (std::size_t i = 0; i < g.num_edges(); ++i) split.train.push_back(i);
  const auto tr = baseline_greedy_triads(g, split, 1);
  ASSERT_EQ(tr.flips.size(), 1u);
  EXPECT_EQ(tr.flips[0].u, 0);
  EXPECT_EQ(tr.flips[0].v, 1);
  EXPECT_EQ(tr.flips[0].gain, 2.0);
  EXPECT_EQ(balance::triad_census(tr.poisoned).balanced, 2);
}

TEST(GreedyTriads, NoTriadsFallsBackToOrder) {
  const auto g = testing_support::cycle(6, {1});
  EdgeSplit split;
  for (std::size_t i = 0; i < g.num_edges(); ++i) split.train.push_back(i);
  const auto tr = baseline_greedy_triads(g, split, 2);
  EXPECT_EQ(tr.pool, (std::vector<std::size_t>{0, 1}));
}

TEST(GreedyTriads, BalanceNeverIncreases) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = community_graph(20, 0.35, s);
    const auto split = split_edges(g, 0.1, s);
    const auto tr = baseline_greedy_triads(g, split, 8);
    check_trace_invariants(g, split, tr);
    SignedGraph cur = g;
    double prev = balance::balance_ratio(cur);
    for (const auto& f : tr.flips) {
      cur = flip_sign(cur, f.u, f.v);
      const double now = balance::balance_ratio(cur);
      EXPECT_LE(now, prev + 1e-15);
      prev = now;
    }
  }
}

TEST(Trace, JsonShape) {
  const auto g = community_graph(12, 0.3, 11);
  const auto split = split_edges(g, 0.2, 11);
  const auto j = to_json(baseline_rand(g, split, 2, 0, {0.1}));
  EXPECT_EQ(j.at("attack"), "rand");
  EXPECT_EQ(j.at("flips").size(), 2u);
  EXPECT_TRUE(j.at("flips")[0].contains("gain"));
}
