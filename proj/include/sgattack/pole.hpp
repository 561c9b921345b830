#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fextra.hpp"
#include "graph.hpp"
#include "numerics/linalg.hpp"
#include "numerics/ops.hpp"
#include "rng.hpp"

namespace sga::pole {

inline constexpr double kDegreeFloor = 1e-9;

enum class WalkMode { unsym, sym };

struct WalkParams {
  double t = 1.0;  // Markov time
  WalkMode mode = WalkMode::unsym;
};

inline void require_valid(const WalkParams& p) {
  if (!(p.t > 0.0) || !std::isfinite(p.t)) throw InvalidArgument("Markov time must be positive");
}

// Unsigned degrees of the mask |A|, floored at kDegreeFloor.
inline Vector walk_degrees(const Matrix& mask) {
  return mask.cwiseAbs().rowwise().sum().cwiseMax(kDegreeFloor);
}

inline int isolated_nodes(const Matrix& mask) {
  return static_cast<int>((mask.cwiseAbs().rowwise().sum().array() == 0.0).count());
}

// M(t) = exp(-(I - D^-1 A) t) (unsym) or exp(-(I - D^-1/2 A D^-1/2) t) (sym).
inline ad::Var transition_on_tape(ad::Tape& tape, ad::Var a, const Vector& degrees, const WalkParams& p) {
  require_valid(p);
  const auto n = a.rows();
  const ad::Var shift = tape.constant(-p.t * Matrix::Identity(n, n));
  if (p.mode == WalkMode::sym) {
    const Vector inv_sqrt = degrees.cwiseSqrt().cwiseInverse();
    const ad::Var normalized = ad::scale_cols(ad::scale_rows(a, inv_sqrt), inv_sqrt);
    return ad::sym_matrix_exp(ad::add(ad::scale(normalized, p.t), shift));
  }
  const ad::Var walk = ad::scale_rows(a, degrees.cwiseInverse());
  return ad::matrix_exp(ad::add(ad::scale(walk, p.t), shift));
}

inline Matrix transition(const Matrix& a, const Vector& degrees, const WalkParams& p) {
  ad::Tape tape;
  return transition_on_tape(tape, tape.constant(a), degrees, p).value();
}

// Signed (A) or unsigned (|A|) transition matrix of a graph.
inline Matrix signed_transition(const SignedGraph& g, const WalkParams& p, bool signed_walk) {
  if (g.num_nodes() == 0) throw InvalidArgument("signed_transition on empty graph");
  const Matrix mask = g.unsigned_adjacency();
  return transition(signed_walk ? g.adjacency() : mask, walk_degrees(mask), p);
}

// W = D / sum(d) - d d^T / sum(d)^2.
inline Matrix weight_matrix(const Vector& degrees) {
  const double s = degrees.sum();
  return Matrix(degrees.asDiagonal()) / s - degrees * degrees.transpose() / (s * s);
}

// R = M^T W M.
inline ad::Var autocovariance_on_tape(ad::Var m, const Vector& degrees) {
  return ad::matmul(ad::transpose(m), ad::degree_weight_apply(m, degrees));
}

inline Matrix autocovariance(const Matrix& a, const Vector& degrees, const WalkParams& p) {
  ad::Tape tape;
  return autocovariance_on_tape(transition_on_tape(tape, tape.constant(a), degrees, p), degrees).value();
}

inline Matrix autocovariance(const SignedGraph& g, const WalkParams& p, bool signed_walk) {
  const Matrix mask = g.unsigned_adjacency();
  return autocovariance(signed_walk ? g.adjacency() : mask, walk_degrees(mask), p);
}

struct SimilarityMatrices {
  Matrix R_sign, R_abs, W, M_sign, M_abs;
};

// Both autocovariance matrices for an observed adjacency and its mask.
inline SimilarityMatrices similarity(const Matrix& observed, const Matrix& mask, const WalkParams& p) {
  const Vector d = walk_degrees(mask);
  SimilarityMatrices s;
  s.M_sign = transition(observed, d, p);
  s.M_abs = transition(mask, d, p);
  s.W = weight_matrix(d);
  s.R_sign = s.M_sign.transpose() * s.W * s.M_sign;
  s.R_abs = s.M_abs.transpose() * s.W * s.M_abs;
  return s;
}

// ---------------------------------------------------------------------------
// Matrix factorization R ~ U U^T

struct EmbeddingFactor {
  Matrix U;
  int dim = 0;
  int iterations = 0;
  double lr = 0.0;        // step size in effect after backoff
  double residual = 0.0;  // ||U U^T - R||_F^2
  std::vector<double> residuals;
};

inline Matrix initial_factor(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix u(n, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < n; ++i) u(i, j) = rng.normal();
  return u;
}

namespace detail {

// ||U U^T - R||^2 = ||U^T U||^2 - 2 <U, R U> + ||R||^2, from a precomputed R U.
// Avoids the n x n product U U^T.
inline double factor_residual(const Matrix& u, const Matrix& ru, double r_norm2) {
  return std::max(0.0, (u.transpose() * u).squaredNorm() - 2.0 * u.cwiseProduct(ru).sum() + r_norm2);
}

struct FactorIterate {
  Matrix u, ru;  // U and R U
  double residual = 0.0;
};

inline FactorIterate factor_iterate(Matrix u, const Matrix& r, double r_norm2) {
  FactorIterate it{std::move(u), Matrix(), 0.0};
  it.ru = r * it.u;
  it.residual = factor_residual(it.u, it.ru, r_norm2);
  return it;
}

// Largest step size <= lr (halving) for which the residual does not increase.
// The gradient of ||U U^T - R||^2 is 4 (U (U^T U) - R U) for symmetric R.
inline double accepted_step(const FactorIterate& cur, const Matrix& r, double r_norm2, double lr, FactorIterate& next) {
  const Matrix grad = 4.0 * (cur.u * (cur.u.transpose() * cur.u) - cur.ru);
  for (int tries = 0; tries < 80; ++tries, lr *= 0.5) {
    next = factor_iterate(cur.u - lr * grad, r, r_norm2);
    if (std::isfinite(next.residual) && next.residual <= cur.residual) return lr;
  }
  throw NumericError("factorization diverged: no decreasing step found", cur.residual);
}

}  // namespace detail

// L gradient steps on ||U U^T - R||^2 from U0 ~ N(0, 1). The step size is
// halved whenever a step would increase the residual, so residuals never
// increase.
inline EmbeddingFactor factorize(const Matrix& r, Eigen::Index d, int iterations, double lr, std::uint64_t seed) {
  if (r.rows() != r.cols()) throw InvalidArgument("factorize needs a square matrix");
  if (d <= 0) throw InvalidArgument("factorize: dimension must be positive");
  const Matrix rs = 0.5 * (r + r.transpose());
  EmbeddingFactor f;
  f.dim = static_cast<int>(d);
  const double r_norm2 = rs.squaredNorm();
  auto cur = detail::factor_iterate(initial_factor(r.rows(), d, seed), rs, r_norm2);
  f.lr = lr;
  f.residuals.push_back(cur.residual);
  detail::FactorIterate next;
  for (int l = 0; l < iterations; ++l) {
    f.lr = detail::accepted_step(cur, rs, r_norm2, f.lr, next);
    std::swap(cur, next);
    if (!std::isfinite(cur.residual)) throw NumericError("factorization residual not finite", cur.residual);
    f.residuals.push_back(cur.residual);
  }
  f.U = std::move(cur.u);
  f.residual = f.residuals.back();
  f.iterations = iterations;
  return f;
}

// Unrolled factorization on the tape: each accepted step
// U <- U - 4 lr (U (U^T U) - R U) is recorded, so d(U^L)/dR flows back through
// every iteration. The backoff decisions are made on values and are constants
// of the recorded graph.
inline ad::Var factorize_on_tape(ad::Tape& tape, ad::Var r, const Matrix& u0, int iterations, double lr,
                                 double* final_lr = nullptr) {
  ad::Var u = tape.constant(u0);
  const double r_norm2 = r.value().squaredNorm();
  auto cur = detail::factor_iterate(u0, r.value(), r_norm2);
  detail::FactorIterate next;
  for (int l = 0; l < iterations; ++l) {
    lr = detail::accepted_step(cur, r.value(), r_norm2, lr, next);
    const ad::Var gram = ad::matmul(ad::transpose(u), u);
    u = ad::sub(u, ad::scale(ad::sub(ad::matmul(u, gram), ad::matmul(r, u)), 4.0 * lr));
    std::swap(cur, next);
  }
  if (final_lr) *final_lr = lr;
  return u;
}

inline constexpr double kNormFloor = 1e-9;

struct CosineSimilarity {
  Matrix cos;  // in [-1, 1]
  Matrix P;    // (cos + 1) / 2, in [0, 1]
};

// R_cos = clamp(R / (|U_i| |U_j|), -1, 1) with row norms floored at 1e-9.
inline CosineSimilarity cosine_normalize(const Matrix& r, const Matrix& u) {
  if (r.rows() != u.rows() || r.rows() != r.cols()) throw InvalidArgument("cosine_normalize: shape mismatch");
  const Vector norms = u.rowwise().norm().cwiseMax(kNormFloor);
  CosineSimilarity c;
  c.cos = r.cwiseQuotient(norms * norms.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
  c.P = (c.cos.array() + 1.0).matrix() / 2.0;
  return c;
}

// P at the given links only, on the tape.
inline ad::Var cosine_probabilities_on_tape(ad::Var r, ad::Var u, const std::vector<NodePair>& links) {
  const ad::Var norms = ad::row_norms(u, kNormFloor);
  std::vector<int> us, vs;
  for (const auto& [a, b] : links) {
    us.push_back(a);
    vs.push_back(b);
  }
  const ad::Var denom = ad::mul(ad::take_rows(norms, us), ad::take_rows(norms, vs));
  const ad::Var cos = ad::clamp(ad::div(ad::gather(r, links), denom), -1.0, 1.0);
  return ad::scale(ad::add_scalar(cos, 1.0), 0.5);
}

// ---------------------------------------------------------------------------
// The trust predictor

struct PoleOptions {
  WalkParams walk{4.0, WalkMode::unsym};
  fextra::LrTrainOptions train{0.1, 300, fextra::ThetaInit::uniform, 0, fextra::FeatureTransform::identity, true};
};

// Link feature (R_sign[u, v], R_abs[u, v]).
inline Matrix link_features(const SimilarityMatrices& s, const std::vector<NodePair>& links) {
  Matrix x(static_cast<Eigen::Index>(links.size()), 2);
  for (std::size_t k = 0; k < links.size(); ++k) {
    x(static_cast<Eigen::Index>(k), 0) = s.R_sign(links[k].first, links[k].second);
    x(static_cast<Eigen::Index>(k), 1) = s.R_abs(links[k].first, links[k].second);
  }
  return x;
}

// Logistic regression over (R_sign, R_abs) pairs, trained on the split's
// training links with the signs currently in g; returns P(+) for `query`.
inline Vector pole_predict(const SignedGraph& g, const EdgeSplit& split, const std::vector<NodePair>& query,
                           const PoleOptions& opt = {}) {
  const auto s = similarity(observed_adjacency(g, split), g.unsigned_adjacency(), opt.walk);
  std::vector<int> signs;
  for (auto i : split.train) signs.push_back(g.edge(i).sign);
  const auto model = fextra::lr_train(link_features(s, edge_pairs(g, split.train)),
                                      fextra::labels_from_signs(signs, fextra::LabelRole::ground_truth_train), opt.train);
  return fextra::lr_predict(model, link_features(s, query));
}

inline void write_embedding_csv(std::ostream& out, const Matrix& u) {
  out.precision(17);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) out << (j ? "," : "") << u(i, j);
    out << '\n';
  }
}

}  // namespace sga::pole
