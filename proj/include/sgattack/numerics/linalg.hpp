#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "../error.hpp"

namespace sga {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

// Flip each column so its largest-magnitude entry is positive (first one wins on ties).
inline Vector fix_column_signs(Matrix& q) {
  Vector flips = Vector::Ones(q.cols());
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      if (std::abs(q(r, c)) > best + 1e-12) {
        best = std::abs(q(r, c));
        arg = r;
      }
    }
    if (q.rows() > 0 && q(arg, c) < 0) {
      q.col(c) *= -1.0;
      flips(c) = -1.0;
    }
  }
  return flips;
}

// Q * diag(lambda) * Q^T, eigenvalues ascending.
struct SpectralDecomposition {
  Matrix Q;
  Vector lambda;
};

// Eigendecomposition of the symmetric part (S + S^T)/2. With `verify`, the
// orthogonality and reconstruction residuals are checked against
// 1e-8 and 1e-7 * max|S|.
inline SpectralDecomposition sym_eig(const Matrix& s, bool verify = true) {
  if (s.rows() != s.cols()) throw InvalidArgument("sym_eig needs a square matrix");
  require_finite(s, "sym_eig");
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
  SpectralDecomposition d{solver.eigenvectors(), solver.eigenvalues()};
  fix_column_signs(d.Q);
  if (verify && sym.size() > 0) {
    const Eigen::Index n = sym.rows();
    const double orth = (d.Q.transpose() * d.Q - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    const double scale = std::max(sym.cwiseAbs().maxCoeff(), 1e-300);
    const double recon =
        (d.Q * d.lambda.asDiagonal() * d.Q.transpose() - sym).cwiseAbs().maxCoeff();
    if (orth > 1e-8) throw NumericError("eigenvectors not orthogonal", orth);
    if (recon > 1e-7 * scale) throw NumericError("eigen reconstruction residual too large", recon);
  }
  return d;
}

inline int expm_scaling(const Matrix& a) {
  const double norm1 = a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  while (norm1 / std::ldexp(1.0, s) > 0.5) ++s;
  return s;
}

// exp(A) by scaling and squaring with a degree-K Taylor polynomial (Horner).
inline Matrix expm(const Matrix& a, int order = 12) {
  if (a.rows() != a.cols()) throw InvalidArgument("expm needs a square matrix");
  require_finite(a, "expm");
  const Eigen::Index n = a.rows();
  const int s = expm_scaling(a);
  const Matrix x = a / std::ldexp(1.0, s);
  const Matrix id = Matrix::Identity(n, n);
  Matrix p = id;
  for (int k = order; k >= 1; --k) p = id + (x * p) / static_cast<double>(k);
  for (int i = 0; i < s; ++i) p = p * p;
  return p;
}

// Q diag(exp(lambda)) Q^T.
inline Matrix sym_expm(const Matrix& s) {
  const auto d = sym_eig(s, false);
  return d.Q * d.lambda.array().exp().matrix().asDiagonal() * d.Q.transpose();
}

// Divided differences of exp over the spectrum: (e^a - e^b)/(a - b), e^a on the diagonal
// and whenever |a - b| < 1e-9.
inline Matrix exp_divided_differences(const Vector& lambda) {
  const Eigen::Index n = lambda.size();
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = lambda(i), b = lambda(j);
      if (std::abs(a - b) < 1e-9) {
        g(i, j) = std::exp(0.5 * (a + b));
      } else {
        g(i, j) = std::expm1(a - b) * std::exp(b) / (a - b);
      }
    }
  }
  return g;
}

struct TruncatedSvd {
  Matrix U;      // rows x d
  Vector sigma;  // d, descending
  Matrix V;      // cols x d
};

// Top-d singular triplets. U columns are sign-fixed like sym_eig and V follows.
inline TruncatedSvd truncated_svd(const Matrix& a, Eigen::Index d) {
  if (d < 0 || d > std::min(a.rows(), a.cols())) throw InvalidArgument("truncated_svd: d exceeds min(rows, cols)");
  require_finite(a, "truncated_svd");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
  TruncatedSvd out{svd.matrixU().leftCols(d), svd.singularValues().head(d), svd.matrixV().leftCols(d)};
  const Vector flips = fix_column_signs(out.U);
  out.V = out.V * flips.asDiagonal();
  if (d > 0) {
    const double tol = 1e-6 * std::max(out.sigma(0), 1e-12);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double r = (a * out.V.col(c) - out.sigma(c) * out.U.col(c)).norm();
      if (r > tol) throw NumericError("SVD residual too large in column " + std::to_string(c), r);
    }
  }
  return out;
}

}  // namespace linalg
}  // namespace sga
