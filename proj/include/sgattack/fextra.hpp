#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"
#include "jsonlib.hpp"
#include "metrics.hpp"
#include "numerics/ops.hpp"
#include "rng.hpp"

namespace sga::fextra {

inline constexpr int kFeatureCount = 9;

// One row per link:
//   (d_u+, d_u-, d_v+, d_v-, |Gamma_uv|, D++, D+-, D-+, D--)
struct FeatureMatrix {
  Matrix values;
  std::vector<NodePair> links;
};

namespace detail {

inline void require_links(const Matrix& mask, const std::vector<NodePair>& links) {
  for (const auto& [u, v] : links) {
    if (u < 0 || v < 0 || u >= mask.rows() || v >= mask.rows() || mask(u, v) == 0.0)
      throw MissingEdge(u, v);
  }
}

inline Matrix common_neighbor_counts(const Matrix& mask, const std::vector<NodePair>& links) {
  const Matrix mt = mask.transpose();
  Matrix out(static_cast<Eigen::Index>(links.size()), 1);
  for (std::size_t k = 0; k < links.size(); ++k)
    out(static_cast<Eigen::Index>(k), 0) = mt.col(links[k].first).dot(mask.col(links[k].second));
  return out;
}

inline std::vector<int> firsts(const std::vector<NodePair>& links) {
  std::vector<int> r;
  for (const auto& l : links) r.push_back(l.first);
  return r;
}
inline std::vector<int> seconds(const std::vector<NodePair>& links) {
  std::vector<int> r;
  for (const auto& l : links) r.push_back(l.second);
  return r;
}

}  // namespace detail

// Features as a differentiable function of the observed adjacency A:
// A+ = relu(A), A- = A+ - A, degrees from row sums, triads from
// (A+/- A+/-)[u, v]. |Gamma| comes from the constant mask |A|, which also
// covers links whose sign is hidden.
inline ad::Var features_on_tape(ad::Tape& t, ad::Var a, const Matrix& mask, const std::vector<NodePair>& links) {
  detail::require_links(mask, links);
  const ad::Var pos = ad::relu(a);
  const ad::Var negv = ad::sub(pos, a);
  const ad::Var dp = ad::row_sums(pos);
  const ad::Var dn = ad::row_sums(negv);
  const auto us = detail::firsts(links), vs = detail::seconds(links);
  return ad::concat_cols({
      ad::take_rows(dp, us),
      ad::take_rows(dn, us),
      ad::take_rows(dp, vs),
      ad::take_rows(dn, vs),
      t.constant(detail::common_neighbor_counts(mask, links)),
      ad::signed_pair_products(pos, negv, links),
  });
}

// Value-only features for an observed adjacency and a mask |A|.
inline FeatureMatrix extract_features(const Matrix& observed, const Matrix& mask, const std::vector<NodePair>& links) {
  ad::Tape t;
  const ad::Var x = features_on_tape(t, t.constant(observed), mask, links);
  return {x.value(), links};
}

// Features on a fully signed graph.
inline FeatureMatrix extract_features(const SignedGraph& g, const std::vector<NodePair>& links) {
  return extract_features(g.adjacency(), g.unsigned_adjacency(), links);
}

// ---------------------------------------------------------------------------
// Logistic regression

enum class FeatureTransform { identity, log1p };

// p = sigmoid([1, z] theta) with z = (transform(x) - shift) / scale.
// shift/scale are empty when no standardization is applied.
struct LRModel {
  Vector theta;
  FeatureTransform transform = FeatureTransform::identity;
  Vector shift;
  Vector scale;
};

enum class LabelRole { ground_truth_train, hidden_test, self_trained };

struct LabelVector {
  std::vector<int> values;  // 1 = positive sign
  LabelRole role = LabelRole::ground_truth_train;
};

inline LabelVector labels_from_signs(const std::vector<int>& signs, LabelRole role) {
  LabelVector y{{}, role};
  y.values.reserve(signs.size());
  for (int s : signs) y.values.push_back(s > 0 ? 1 : 0);
  return y;
}

inline Matrix apply_transform(const Matrix& x, FeatureTransform tr) {
  return tr == FeatureTransform::log1p ? Matrix(x.array().log1p().matrix()) : x;
}

// [1, standardized(transform(x))].
inline Matrix design_matrix(const Matrix& x, const LRModel& m) {
  Matrix z = apply_transform(x, m.transform);
  if (m.shift.size() == z.cols()) {
    z = (z.rowwise() - m.shift.transpose()).array().rowwise() / m.scale.transpose().array();
  }
  Matrix out(z.rows(), z.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(z.cols()) = z;
  return out;
}

inline double stable_sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

enum class ThetaInit { zeros, uniform };

struct LrTrainOptions {
  double lr = 0.01;
  int iterations = 100;
  ThetaInit init = ThetaInit::uniform;  // U[0, 1]
  std::uint64_t seed = 0;
  FeatureTransform transform = FeatureTransform::identity;
  bool standardize = false;
};

inline Vector initial_theta(Eigen::Index dim, ThetaInit init, std::uint64_t seed) {
  Vector theta = Vector::Zero(dim);
  if (init == ThetaInit::uniform) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < dim; ++i) theta(i) = rng.uniform01();
  }
  return theta;
}

inline double mean_cross_entropy(const Vector& p, const Vector& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p(i), 1e-12, 1.0 - 1e-12);
    s -= y(i) * std::log(pi) + (1.0 - y(i)) * std::log(1.0 - pi);
  }
  return p.size() ? s / static_cast<double>(p.size()) : 0.0;
}

// Full-batch gradient descent on mean cross-entropy, intercept prepended.
// `losses`, when given, receives the loss before every step and after the last.
inline LRModel lr_train(const Matrix& x, const LabelVector& y, const LrTrainOptions& opt = {},
                        std::vector<double>* losses = nullptr) {
  if (x.rows() != static_cast<Eigen::Index>(y.values.size())) throw InvalidArgument("lr_train: rows(X) != len(y)");
  if (opt.iterations < 1) throw InvalidArgument("lr_train: iterations must be >= 1");
  if (x.rows() == 0) throw InvalidArgument("lr_train: empty training set");
  LRModel m;
  m.transform = opt.transform;
  if (opt.standardize) {
    const Matrix z = apply_transform(x, opt.transform);
    m.shift = z.colwise().mean().transpose();
    m.scale = ((z.rowwise() - m.shift.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index i = 0; i < m.scale.size(); ++i)
      if (!(m.scale(i) > 1e-12)) m.scale(i) = 1.0;
  }
  const Matrix z = design_matrix(x, m);
  Vector yv(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) yv(i) = y.values[static_cast<std::size_t>(i)];
  m.theta = initial_theta(z.cols(), opt.init, opt.seed);
  const double inv_m = 1.0 / static_cast<double>(z.rows());
  for (int step = 0; step <= opt.iterations; ++step) {
    const Vector p = (z * m.theta).unaryExpr(&stable_sigmoid);
    if (losses || step == opt.iterations) {
      const double loss = mean_cross_entropy(p, yv);
      if (!std::isfinite(loss)) throw NumericError("lr_train: non-finite loss at step " + std::to_string(step));
      if (losses) losses->push_back(loss);
    }
    if (step == opt.iterations) break;
    m.theta -= opt.lr * inv_m * (z.transpose() * (p - yv));
    if (!m.theta.allFinite()) throw NumericError("lr_train: non-finite parameters at step " + std::to_string(step));
  }
  return m;
}

inline Vector lr_predict(const LRModel& m, const Matrix& x) {
  const Matrix z = design_matrix(x, m);
  if (z.cols() != m.theta.size()) throw InvalidArgument("lr_predict: feature count does not match model");
  return (z * m.theta).unaryExpr(&stable_sigmoid);
}

// ---------------------------------------------------------------------------
// Closed-form least-squares surrogate

struct OlsOptions {
  double label_eps = 0.01;
  double ridge = 1e-6;
};

// Logit of a label clipped to [eps, 1 - eps]; for y in {0, 1} this is
// +/- ln((1 - eps) / eps).
inline double label_logit(double y, double eps) {
  const double c = std::clamp(y, eps, 1.0 - eps);
  return std::log(c / (1.0 - c));
}

// theta = (Z^T Z + ridge I)^-1 Z^T logit(clip(y)), Z = [1, ln(X + 1)].
inline LRModel ols_fit(const Matrix& x, const LabelVector& y, const OlsOptions& opt = {}) {
  if (x.rows() != static_cast<Eigen::Index>(y.values.size())) throw InvalidArgument("ols_fit: rows(X) != len(y)");
  LRModel m;
  m.transform = FeatureTransform::log1p;
  const Matrix z = design_matrix(x, m);
  Vector target(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) target(i) = label_logit(y.values[static_cast<std::size_t>(i)], opt.label_eps);
  const Matrix gram = z.transpose() * z + opt.ridge * Matrix::Identity(z.cols(), z.cols());
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15))
    throw NumericError("ols_fit: Gram matrix singular beyond damping", ldlt.rcond());
  m.theta = ldlt.solve(z.transpose() * target);
  return m;
}

// Tape form of the OLS fit: targets are a * ln((1-eps)/eps) for the (relaxed)
// training-link signs a, which equals the clipped logit at a = +/-1.
inline ad::Var ols_theta_on_tape(ad::Tape& t, ad::Var design, ad::Var signs, const OlsOptions& opt = {}) {
  const ad::Var zt = ad::transpose(design);
  const auto k = design.cols();
  const ad::Var gram = ad::add(ad::matmul(zt, design), t.constant(opt.ridge * Matrix::Identity(k, k)));
  const ad::Var target = ad::scale(signs, label_logit(1.0, opt.label_eps));
  return ad::solve(gram, ad::matmul(zt, target));
}

// [1, ln(X + 1)] on the tape.
inline ad::Var log_design_on_tape(ad::Tape& t, ad::Var features) {
  const ad::Var lx = ad::log(ad::add_scalar(features, 1.0));
  return ad::concat_cols({t.constant(Matrix::Ones(features.rows(), 1)), lx});
}

inline Json to_json(const LRModel& m) {
  Json theta = Json::array();
  for (Eigen::Index i = 0; i < m.theta.size(); ++i) theta.push_back(m.theta(i));
  Json j{{"theta", theta}};
  j["transform"] = m.transform == FeatureTransform::log1p ? "log1p" : "identity";
  if (m.shift.size()) {
    j["shift"] = std::vector<double>(m.shift.data(), m.shift.data() + m.shift.size());
    j["scale"] = std::vector<double>(m.scale.data(), m.scale.data() + m.scale.size());
  }
  return j;
}

inline LRModel model_from_json(const Json& j) {
  LRModel m;
  const auto theta = j.at("theta").get<std::vector<double>>();
  m.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  if (j.value("transform", std::string("identity")) == "log1p") m.transform = FeatureTransform::log1p;
  if (j.contains("shift")) {
    const auto s = j.at("shift").get<std::vector<double>>();
    const auto c = j.at("scale").get<std::vector<double>>();
    m.shift = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
    m.scale = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  }
  return m;
}

// ---------------------------------------------------------------------------
// The trust predictor: features on the observed graph, LR on training links.

struct FextraOptions {
  LrTrainOptions train{0.1, 300, ThetaInit::uniform, 0, FeatureTransform::log1p, true};
};

// Trains on the split's training links (with the signs currently in g) and
// returns P(+) for `query` links. Test-link signs are hidden from features.
inline Vector fextra_predict(const SignedGraph& g, const EdgeSplit& split, const std::vector<NodePair>& query,
                             const FextraOptions& opt = {}, LRModel* fitted = nullptr) {
  const Matrix observed = observed_adjacency(g, split);
  const Matrix mask = g.unsigned_adjacency();
  const auto train_links = edge_pairs(g, split.train);
  const auto x_train = extract_features(observed, mask, train_links);
  std::vector<int> signs;
  for (auto i : split.train) signs.push_back(g.edge(i).sign);
  const auto model = lr_train(x_train.values, labels_from_signs(signs, LabelRole::ground_truth_train), opt.train);
  if (fitted) *fitted = model;
  return lr_predict(model, extract_features(observed, mask, query).values);
}

}  // namespace sga::fextra
