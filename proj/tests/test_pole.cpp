#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sgattack/numerics/grad_check.hpp"
#include "sgattack/pole.hpp"
#include "support.hpp"

using namespace sga;
using namespace sga::pole;
using testing_support::random_connected_graph;
using testing_support::two_triangles;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

EdgeSplit hide(const SignedGraph& g, int u, int v) {
  EdgeSplit s;
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    const auto& e = g.edge(i);
    if (e.u == std::min(u, v) && e.v == std::max(u, v)) {
      s.test.push_back(i);
      s.hidden_signs.push_back(e.sign);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

}  // namespace

TEST(Transition, AllPositiveSignedEqualsUnsigned) {
  const auto g = random_connected_graph(9, 0.3, 2, 1.0);
  for (auto mode : {WalkMode::unsym, WalkMode::sym}) {
    const WalkParams p{1.0, mode};
    EXPECT_EQ(signed_transition(g, p, true), signed_transition(g, p, false));
    EXPECT_EQ(autocovariance(g, p, true), autocovariance(g, p, false));
  }
}

TEST(Transition, SmallTimeApproachesIdentity) {
  const auto g = random_connected_graph(6, 0.4, 1);
  const Matrix m = signed_transition(g, {0.001, WalkMode::unsym}, true);
  EXPECT_LT(max_abs(m - Matrix::Identity(6, 6)), 0.01);
}

TEST(Transition, TwoNodeClosedForm) {
  const SignedGraph g(2, {{0, 1, 1}});
  const Matrix m = signed_transition(g, {1.0, WalkMode::unsym}, true);
  EXPECT_NEAR(m(0, 0), 0.5677, 5e-5);
  EXPECT_NEAR(m(0, 1), 0.4323, 5e-5);
  EXPECT_THROW(signed_transition(g, {0.0, WalkMode::unsym}, true), InvalidArgument);
}

TEST(Transition, SymEqualsUnsymOnRegularGraphs) {
  for (int n : {5, 8, 11}) {
    const auto c = testing_support::cycle(n, {1, -1, 1, 1, -1});
    for (double t : {0.5, 1.0, 3.0}) {
      EXPECT_LT(max_abs(signed_transition(c, {t, WalkMode::sym}, true) - signed_transition(c, {t, WalkMode::unsym}, true)),
                1e-10);
    }
  }
  const auto k5 = testing_support::complete_graph(5, -1);
  EXPECT_LT(max_abs(signed_transition(k5, {1, WalkMode::sym}, true) - signed_transition(k5, {1, WalkMode::unsym}, true)), 1e-10);
}

TEST(Transition, IsolatedNodeUsesFloor) {
  const SignedGraph g(3, {{0, 1, 1}});
  const Matrix mask = g.unsigned_adjacency();
  EXPECT_EQ(isolated_nodes(mask), 1);
  EXPECT_EQ(walk_degrees(mask)(2), kDegreeFloor);
  const Matrix m = signed_transition(g, {1.0, WalkMode::sym}, true);
  EXPECT_TRUE(m.allFinite());
  EXPECT_NEAR(m(2, 2), std::exp(-1.0), 1e-12);
}

TEST(Autocovariance, WeightMatrixAnnihilatesOnes) {
  const auto g = random_connected_graph(10, 0.3, 4);
  const Matrix w = weight_matrix(walk_degrees(g.unsigned_adjacency()));
  EXPECT_LT(std::abs(w.sum()), 1e-14);
  EXPECT_LT((w * Vector::Ones(10)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Autocovariance, DefinitionAndSymmetry) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = random_connected_graph(9, 0.3, s);
    const WalkParams p{1.0, WalkMode::sym};
    const auto sim = similarity(g.adjacency(), g.unsigned_adjacency(), p);
    EXPECT_LT(max_abs(sim.R_sign - sim.R_sign.transpose()), 1e-10);
    EXPECT_LT(max_abs(sim.R_sign - autocovariance(g, p, true)), 1e-12);
    EXPECT_LT(max_abs(sim.R_abs - autocovariance(g, p, false)), 1e-12);
    const Matrix recomputed = sim.M_sign.transpose() * weight_matrix(walk_degrees(g.unsigned_adjacency())) * sim.M_sign;
    EXPECT_LT(max_abs(sim.R_sign - recomputed), 1e-14);
  }
}

TEST(Autocovariance, TwoTrianglesSignPattern) {
  const auto g = two_triangles();
  const Matrix r = autocovariance(g, {1.0, WalkMode::unsym}, true);
  for (int a : {0, 1, 2})
    for (int b : {0, 1, 2}) {
      EXPECT_GT(r(a, b), 0.0);
      EXPECT_GT(r(a + 3, b + 3), 0.0);
    }
  int negative = 0;
  for (int a : {0, 1, 2})
    for (int b : {3, 4, 5}) negative += r(a, b) < 0.0;
  EXPECT_GE(negative, 5);
}

TEST(Autocovariance, GradientPassesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = random_connected_graph(7, 0.35, s);
    const Matrix mask = g.unsigned_adjacency();
    const Vector d = walk_degrees(mask);
    const Matrix w = Matrix::Random(7, 7);
    auto f = [&](ad::Tape& t, ad::Var a) {
      const auto m = transition_on_tape(t, ad::symmetrize(a), d, {1.0, WalkMode::sym});
      return ad::sum(ad::mul(autocovariance_on_tape(m, d), t.constant(w)));
    };
    EXPECT_LT(ad::grad_check(f, g.adjacency(), 1e-6).max_rel_error, 1e-3) << "seed " << s;
    auto fu = [&](ad::Tape& t, ad::Var a) {
      const auto m = transition_on_tape(t, a, d, {1.0, WalkMode::unsym});
      return ad::sum(ad::mul(autocovariance_on_tape(m, d), t.constant(w)));
    };
    EXPECT_LT(ad::grad_check(fu, g.adjacency(), 1e-6).max_rel_error, 1e-3) << "seed " << s;
  }
}

TEST(Factorize, IdentityTarget) {
  const auto f = factorize(Matrix::Identity(6, 6), 6, 500, 0.01, 1);
  EXPECT_LT(f.residual, 1e-3);
  EXPECT_EQ(f.residuals.size(), 501u);
}

TEST(Factorize, ZeroTargetShrinks) {
  const auto f = factorize(Matrix::Zero(5, 5), 3, 50, 0.01, 2);
  EXPECT_LE(f.residual, f.residuals.front());
  EXPECT_LT(f.U.norm(), initial_factor(5, 3, 2).norm());
}

TEST(Factorize, RankTwoTarget) {
  Matrix v(8, 2);
  Rng rng(3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  const auto f = factorize(v * v.transpose(), 2, 3000, 0.01, 4);
  EXPECT_LT(f.residual, 1e-4);
}

TEST(Factorize, ResidualsNeverIncrease) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = random_connected_graph(20, 0.2, s);
    const Matrix r = autocovariance(g, {1.0, WalkMode::sym}, true);
    const auto f = factorize(r, 32, 50, 0.5, s);  // large lr forces backoff
    for (std::size_t i = 1; i < f.residuals.size(); ++i) EXPECT_LE(f.residuals[i], f.residuals[i - 1]);
    EXPECT_LT(f.lr, 0.5);
  }
}

TEST(Factorize, TapeMatchesValuePath) {
  const auto g = random_connected_graph(10, 0.3, 6);
  const Matrix r = autocovariance(g, {1.0, WalkMode::sym}, true);
  const auto f = factorize(r, 4, 20, 0.01, 9);
  ad::Tape t;
  const auto u = factorize_on_tape(t, t.constant(r), initial_factor(10, 4, 9), 20, 0.01);
  EXPECT_LT(max_abs(u.value() - f.U), 1e-12);
}

TEST(Cosine, Examples) {
  Rng rng(1);
  Matrix u(5, 3);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
  const auto c = cosine_normalize(u * u.transpose(), u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(c.cos(i, i), 1.0, 1e-12);
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(c.cos(i, j), u.row(i).dot(u.row(j)) / (u.row(i).norm() * u.row(j).norm()), 1e-12);
      EXPECT_NEAR(c.P(i, j), (c.cos(i, j) + 1) / 2, 1e-15);
    }
  }
  Matrix r = Matrix::Constant(2, 2, 100.0);
  r(0, 1) = r(1, 0) = -100.0;
  const auto big = cosine_normalize(r, Matrix::Identity(2, 2));
  EXPECT_EQ(big.P(0, 0), 1.0);
  EXPECT_EQ(big.P(0, 1), 0.0);
  Matrix z = Matrix::Ones(3, 2);
  z.row(1).setZero();
  const auto zc = cosine_normalize(Matrix::Constant(3, 3, 1e-3), z);
  EXPECT_TRUE(zc.cos.allFinite());
  EXPECT_EQ(zc.cos(1, 0), 1.0);
}

TEST(Cosine, RangesAndTapeAgreement) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = random_connected_graph(12, 0.3, s);
    const Matrix r = autocovariance(g, {1.0, WalkMode::sym}, true);
    const auto f = factorize(r, 4, 10, 0.01, s);
    const auto c = cosine_normalize(r, f.U);
    EXPECT_LE(c.cos.maxCoeff(), 1.0);
    EXPECT_GE(c.cos.minCoeff(), -1.0);
    EXPECT_LE(c.P.maxCoeff(), 1.0);
    EXPECT_GE(c.P.minCoeff(), 0.0);
    const auto links = g.pairs();
    ad::Tape t;
    const auto p = cosine_probabilities_on_tape(t.constant(r), t.constant(f.U), links);
    for (std::size_t k = 0; k < links.size(); ++k)
      EXPECT_NEAR(p.value()(static_cast<Eigen::Index>(k), 0), c.P(links[k].first, links[k].second), 1e-14);
  }
}

TEST(Predict, AllPositiveTrainingGraph) {
  const auto g = random_connected_graph(12, 0.3, 3, 1.0);
  // With nothing hidden the signed and unsigned walks coincide.
  EdgeSplit all;
  for (std::size_t i = 0; i < g.num_edges(); ++i) all.train.push_back(i);
  const auto s = similarity(observed_adjacency(g, all), g.unsigned_adjacency(), PoleOptions{}.walk);
  const auto x = link_features(s, g.pairs());
  EXPECT_EQ(x.col(0), x.col(1));
  EXPECT_GT(pole_predict(g, all, g.pairs()).minCoeff(), 0.5);
  const auto split = split_edges(g, 0.2, 1);
  const Vector p = pole_predict(g, split, g.pairs());
  EXPECT_GT(p.minCoeff(), 0.5);
}

TEST(Predict, TwoTrianglesHiddenWithinEdgeIsPositive) {
  const auto g = two_triangles();
  for (auto [u, v] : std::vector<NodePair>{{0, 1}, {4, 5}}) {
    const Vector p = pole_predict(g, hide(g, u, v), {{u, v}});
    EXPECT_GT(p(0), 0.5) << u << "," << v;
  }
}

TEST(Predict, TwoTrianglesHiddenBridgeIsNegative) {
  const auto g = two_triangles();
  const Vector p = pole_predict(g, hide(g, 2, 3), {{2, 3}});
  EXPECT_LT(p(0), 0.5);
}

TEST(Embedding, CsvShape) {
  std::ostringstream out;
  write_embedding_csv(out, Matrix::Ones(3, 2));
  EXPECT_EQ(out.str(), "1,1\n1,1\n1,1\n");
}
