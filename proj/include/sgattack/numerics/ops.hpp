#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "tape.hpp"

namespace sga::ad {

using NodePair = std::pair<int, int>;

namespace detail {

inline void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

}  // namespace detail

// --- elementwise arithmetic -------------------------------------------------

inline Var add(Var a, Var b) {
  detail::same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  detail::same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate_with(b, [&] { return Matrix(-g); });
  });
}

inline Var scale(Var a, double c) {
  return a.tape().record(a.value() * c, {a}, [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g * c); });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var add_scalar(Var a, double c) {
  return a.tape().record((a.value().array() + c).matrix(), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }

// Hadamard product.
inline Var mul(Var a, Var b) {
  detail::same_shape(a, b, "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate_with(a, [&] { return Matrix(g.cwiseProduct(b.value())); });
    t.accumulate_with(b, [&] { return Matrix(g.cwiseProduct(a.value())); });
  });
}

// Elementwise a / b.
inline Var div(Var a, Var b) {
  detail::same_shape(a, b, "div");
  return a.tape().record(a.value().cwiseQuotient(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate_with(a, [&] { return Matrix(g.cwiseQuotient(b.value())); });
    t.accumulate_with(b, [&] {
      return Matrix(-g.cwiseProduct(a.value()).cwiseQuotient(b.value().cwiseProduct(b.value())));
    });
  });
}

inline Var relu(Var a) {
  return a.tape().record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

inline Var sigmoid(Var a) {
  Tape& tape = a.tape();
  const std::size_t out = tape.size();
  Matrix v = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return tape.record(std::move(v), {a}, [a, out](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(out);
    t.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
  });
}

inline Var log(Var a) {
  return a.tape().record(a.value().array().log().matrix(), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseQuotient(a.value())); });
}

inline Var sqrt(Var a) {
  Tape& tape = a.tape();
  const std::size_t out = tape.size();
  return tape.record(a.value().cwiseSqrt(), {a}, [a, out](Tape& t, const Matrix& g) {
    t.accumulate(a, (0.5 * g.array() / t.value(out).array()).matrix());
  });
}

// Clip into [lo, hi]; gradient passes only strictly inside.
inline Var clamp(Var a, double lo, double hi) {
  return a.tape().record(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [a, lo, hi](Tape& t, const Matrix& g) {
    const auto& x = a.value().array();
    t.accumulate(a, ((x > lo) && (x < hi)).select(g, 0.0).matrix());
  });
}

// --- linear algebra ------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate_with(a, [&] { return Matrix(g * b.value().transpose()); });
    t.accumulate_with(b, [&] { return Matrix(a.value().transpose() * g); });
  });
}

inline Var transpose(Var a) {
  return a.tape().record(a.value().transpose(), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

// (A + A^T) / 2.
inline Var symmetrize(Var a) {
  if (a.rows() != a.cols()) throw InvalidArgument("symmetrize needs a square matrix");
  return a.tape().record(0.5 * (a.value() + a.value().transpose()), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 0.5 * (g + g.transpose()));
  });
}

// diag(d) * A for a constant vector d.
inline Var scale_rows(Var a, const Vector& d) {
  if (d.size() != a.rows()) throw InvalidArgument("scale_rows: length mismatch");
  return a.tape().record(d.asDiagonal() * a.value(), {a},
                         [a, d](Tape& t, const Matrix& g) { t.accumulate(a, d.asDiagonal() * g); });
}

// A * diag(d) for a constant vector d.
inline Var scale_cols(Var a, const Vector& d) {
  if (d.size() != a.cols()) throw InvalidArgument("scale_cols: length mismatch");
  return a.tape().record(a.value() * d.asDiagonal(), {a},
                         [a, d](Tape& t, const Matrix& g) { t.accumulate(a, g * d.asDiagonal()); });
}

// Solve A X = B for square A (partial-pivot LU).
inline Var solve(Var a, Var b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) throw InvalidArgument("solve: shape mismatch");
  Eigen::PartialPivLU<Matrix> lu(a.value());
  const double det = std::abs(lu.determinant());
  if (!(det > 1e-300) || !std::isfinite(det)) throw NumericError("solve: singular matrix", det);
  Tape& tape = a.tape();
  const std::size_t out = tape.size();
  return tape.record(lu.solve(b.value()), {a, b}, [a, b, out, lu](Tape& t, const Matrix& g) {
    const Matrix gb = lu.transpose().solve(g);
    t.accumulate(b, gb);
    t.accumulate_with(a, [&] { return Matrix(-gb * t.value(out).transpose()); });
  });
}

// --- reductions and gathers --------------------------------------------------

inline Var sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  const auto r = a.rows(), c = a.cols();
  return a.tape().record(std::move(v), {a},
                         [a, r, c](Tape& t, const Matrix& g) { t.accumulate(a, Matrix::Constant(r, c, g(0, 0))); });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw InvalidArgument("mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

inline Var trace(Var a) {
  if (a.rows() != a.cols()) throw InvalidArgument("trace needs a square matrix");
  Matrix v(1, 1);
  v(0, 0) = a.value().trace();
  const auto n = a.rows();
  return a.tape().record(std::move(v), {a}, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Identity(n, n) * g(0, 0));
  });
}

// tr(A B) without forming the product.
inline Var trace_of_product(Var a, Var b) {
  if (a.rows() != b.cols() || a.cols() != b.rows()) throw InvalidArgument("trace_of_product: shape mismatch");
  Matrix v(1, 1);
  v(0, 0) = a.value().cwiseProduct(b.value().transpose()).sum();
  return a.tape().record(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate_with(a, [&] { return Matrix(b.value().transpose() * g(0, 0)); });
    t.accumulate_with(b, [&] { return Matrix(a.value().transpose() * g(0, 0)); });
  });
}

// n x 1 vector of row sums.
inline Var row_sums(Var a) {
  const auto c = a.cols();
  return a.tape().record(a.value().rowwise().sum(), {a}, [a, c](Tape& t, const Matrix& g) {
    t.accumulate(a, g.col(0).replicate(1, c));
  });
}

// A - rowmean(A) 1^T.
inline Var center_rows(Var a) {
  const auto c = static_cast<double>(a.cols());
  Matrix v = a.value().colwise() - a.value().rowwise().mean();
  return a.tape().record(std::move(v), {a}, [a, c](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix(g.colwise() - g.rowwise().sum() / c));
  });
}

// Entries A(u, v) at the given pairs, as an m x 1 vector.
inline Var gather(Var a, std::vector<NodePair> pairs) {
  Matrix v(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) v(static_cast<Eigen::Index>(k), 0) = a.value()(pairs[k].first, pairs[k].second);
  const auto r = a.rows(), c = a.cols();
  return a.tape().record(std::move(v), {a}, [a, r, c, pairs = std::move(pairs)](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(r, c);
    for (std::size_t k = 0; k < pairs.size(); ++k) d(pairs[k].first, pairs[k].second) += g(static_cast<Eigen::Index>(k), 0);
    t.accumulate(a, d);
  });
}

// Rows idx of a column vector (or matrix), in order.
inline Var take_rows(Var a, std::vector<int> idx) {
  Matrix v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) v.row(static_cast<Eigen::Index>(k)) = a.value().row(idx[k]);
  const auto r = a.rows(), c = a.cols();
  return a.tape().record(std::move(v), {a}, [a, r, c, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(r, c);
    for (std::size_t k = 0; k < idx.size(); ++k) d.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(a, d);
  });
}

// z_k = (X Y)[u_k, v_k] = X.row(u_k) . Y.col(v_k), without forming X Y.
// Rows of X are read as columns of X^T (Eigen is column-major).
inline Var pair_products(Var x, Var y, std::vector<NodePair> pairs) {
  if (x.cols() != y.rows()) throw InvalidArgument("pair_products: inner dimensions differ");
  const Matrix xt = x.value().transpose();
  Matrix v(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    v(static_cast<Eigen::Index>(k), 0) = xt.col(pairs[k].first).dot(y.value().col(pairs[k].second));
  return x.tape().record(std::move(v), {x, y}, [x, y, pairs = std::move(pairs)](Tape& t, const Matrix& g) {
    t.accumulate_with(x, [&] {
      Matrix dt = Matrix::Zero(x.cols(), x.rows());
      for (std::size_t k = 0; k < pairs.size(); ++k)
        dt.col(pairs[k].first) += g(static_cast<Eigen::Index>(k), 0) * y.value().col(pairs[k].second);
      return Matrix(dt.transpose());
    });
    t.accumulate_with(y, [&] {
      const Matrix xt = x.value().transpose();
      Matrix d = Matrix::Zero(y.rows(), y.cols());
      for (std::size_t k = 0; k < pairs.size(); ++k)
        d.col(pairs[k].second) += g(static_cast<Eigen::Index>(k), 0) * xt.col(pairs[k].first);
      return d;
    });
  });
}

namespace detail {

// Nonzero pattern of a or b, listed by row and by column.
struct JointSupport {
  std::vector<std::vector<int>> rows, cols;
};

inline JointSupport joint_support(const Matrix& a, const Matrix& b) {
  JointSupport s{std::vector<std::vector<int>>(static_cast<std::size_t>(a.rows())),
                 std::vector<std::vector<int>>(static_cast<std::size_t>(a.cols()))};
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      if (a(r, c) != 0.0 || b(r, c) != 0.0) {
        s.rows[static_cast<std::size_t>(r)].push_back(static_cast<int>(c));
        s.cols[static_cast<std::size_t>(c)].push_back(static_cast<int>(r));
      }
  return s;
}

}  // namespace detail

// The four products [XX, XY, YX, YY] at each pair, m x 4. Same values as four
// pair_products calls, but sums run only over nonzero entries.
inline Var signed_pair_products(Var x, Var y, std::vector<NodePair> pairs) {
  const auto n = x.rows();
  if (x.cols() != n || y.rows() != n || y.cols() != n) throw InvalidArgument("signed_pair_products: need square n x n");
  const Matrix& xv = x.value();
  const Matrix& yv = y.value();
  auto [rows, cols] = detail::joint_support(xv, yv);
  Matrix v(static_cast<Eigen::Index>(pairs.size()), 4);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int w : rows[static_cast<std::size_t>(a)]) {
      const double xa = xv(a, w), ya = yv(a, w), xb = xv(w, b), yb = yv(w, b);
      s0 += xa * xb;
      s1 += xa * yb;
      s2 += ya * xb;
      s3 += ya * yb;
    }
    const auto i = static_cast<Eigen::Index>(k);
    v(i, 0) = s0;
    v(i, 1) = s1;
    v(i, 2) = s2;
    v(i, 3) = s3;
  }
  return x.tape().record(std::move(v), {x, y},
                         [x, y, n, rows = std::move(rows), cols = std::move(cols), pairs = std::move(pairs)](Tape& t, const Matrix& g) {
    const Matrix& xv = x.value();
    const Matrix& yv = y.value();
    Matrix dx = Matrix::Zero(n, n), dy = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [a, b] = pairs[k];
      const auto i = static_cast<Eigen::Index>(k);
      const double g0 = g(i, 0), g1 = g(i, 1), g2 = g(i, 2), g3 = g(i, 3);
      for (int w : cols[static_cast<std::size_t>(b)]) {
        dx(a, w) += g0 * xv(w, b) + g1 * yv(w, b);
        dy(a, w) += g2 * xv(w, b) + g3 * yv(w, b);
      }
      for (int w : rows[static_cast<std::size_t>(a)]) {
        dx(w, b) += g0 * xv(a, w) + g2 * yv(a, w);
        dy(w, b) += g1 * xv(a, w) + g3 * yv(a, w);
      }
    }
    t.accumulate(x, dx);
    t.accumulate(y, dy);
  });
}

// Horizontal concatenation of equal-height blocks.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols of nothing");
  const auto r = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw InvalidArgument("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix v(r, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return parts.front().tape().record(std::move(v), parts, [parts, offsets](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < parts.size(); ++i)
      t.accumulate_with(parts[i], [&] { return Matrix(g.middleCols(offsets[i], parts[i].cols())); });
  });
}

// Euclidean norm of each row, floored: n x 1.
inline Var row_norms(Var a, double floor) {
  Tape& tape = a.tape();
  const std::size_t out = tape.size();
  Vector raw = a.value().rowwise().norm();
  Matrix v = raw.cwiseMax(floor);
  return tape.record(std::move(v), {a}, [a, out, floor](Tape& t, const Matrix& g) {
    const Matrix& nrm = t.value(out);
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (nrm(i, 0) > floor) d.row(i) = g(i, 0) / nrm(i, 0) * a.value().row(i);
    t.accumulate(a, d);
  });
}

// --- matrix functions ----------------------------------------------------------

// exp(A) by scaling and squaring with a Horner-form Taylor polynomial; each
// step is a recorded primitive so the result is differentiable.
inline Var matrix_exp(Var a, int order = 12) {
  if (a.rows() != a.cols()) throw InvalidArgument("matrix_exp needs a square matrix");
  linalg::require_finite(a.value(), "matrix_exp");
  Tape& t = a.tape();
  const int s = linalg::expm_scaling(a.value());
  const Var x = scale(a, 1.0 / std::ldexp(1.0, s));
  const auto n = a.rows();
  const Var id = t.constant(Matrix::Identity(n, n));
  Var p = add(id, scale(x, 1.0 / order));
  for (int k = order - 1; k >= 1; --k) p = add(id, scale(matmul(x, p), 1.0 / k));
  for (int i = 0; i < s; ++i) p = matmul(p, p);
  return p;
}

// exp of the symmetric part of S through its eigendecomposition. The
// backward pass uses the Daleckii-Krein formula
//   dS = Q (Gamma o (Q^T G Q)) Q^T,  Gamma_ij = (e^li - e^lj)/(li - lj).
inline Var sym_matrix_exp(Var s) {
  if (s.rows() != s.cols()) throw InvalidArgument("sym_matrix_exp needs a square matrix");
  auto dec = linalg::sym_eig(s.value(), false);
  Matrix v = dec.Q * dec.lambda.array().exp().matrix().asDiagonal() * dec.Q.transpose();
  return s.tape().record(std::move(v), {s}, [s, dec = std::move(dec)](Tape& t, const Matrix& g) {
    const Matrix gamma = linalg::exp_divided_differences(dec.lambda);
    const Matrix inner = gamma.cwiseProduct(dec.Q.transpose() * g * dec.Q);
    const Matrix d = dec.Q * inner * dec.Q.transpose();
    t.accumulate(s, 0.5 * (d + d.transpose()));
  });
}

// W M with W = diag(d)/S - d d^T / S^2, S = sum(d), without forming W.
inline Var degree_weight_apply(Var m, const Vector& d) {
  if (d.size() != m.rows()) throw InvalidArgument("degree_weight_apply: length mismatch");
  const double total = d.sum();
  if (!(total > 0)) throw NumericError("degree_weight_apply: zero total degree");
  auto apply = [d, total](const Matrix& x) -> Matrix {
    const Eigen::RowVectorXd dt_x = d.transpose() * x;
    return (d.asDiagonal() * x) / total - d * dt_x / (total * total);
  };
  return m.tape().record(apply(m.value()), {m}, [m, apply](Tape& t, const Matrix& g) { t.accumulate(m, apply(g)); });
}

}  // namespace sga::ad
