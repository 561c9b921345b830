#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "balance.hpp"
#include "graph.hpp"
#include "jsonlib.hpp"
#include "metrics.hpp"
#include "numerics/linalg.hpp"

namespace sga::detect {

inline constexpr int kTsvdDim = 32;

// (T(g), Pol(g, t)).
inline Vector metric_features(const SignedGraph& g, double t) {
  Vector f(2);
  f << balance::balance_ratio(g), balance::graph_polarization(g, t);
  return f;
}

// Mean row of the top-d left singular vectors of A, zero-padded to `pad`.
// Singular vectors are only defined up to sign (and, for repeated singular
// values, up to rotation within the cluster), so each cluster is expressed in
// the basis whose first vector is the normalized projection of the all-ones
// vector and whose other vectors sum to zero. The mean row then has entry
// |U_c^T 1| / n at the cluster's first slot and 0 elsewhere in it.
inline Vector tsvd_features(const SignedGraph& g, int d = kTsvdDim, int pad = kTsvdDim) {
  const int n = g.num_nodes();
  if (n == 0) throw InvalidArgument("tsvd_features on empty graph");
  const int k = std::min(d, n);
  const auto svd = linalg::truncated_svd(g.adjacency(), n);
  const double tol = 1e-8 * std::max(1.0, svd.sigma(0));
  Vector f = Vector::Zero(std::max(pad, k));
  for (int a = 0; a < k;) {
    int b = a + 1;
    while (b < n && std::abs(svd.sigma(b) - svd.sigma(a)) <= tol) ++b;
    f(a) = svd.U.middleCols(a, b - a).colwise().sum().norm() / n;
    a = b;
  }
  return f;
}

// ---------------------------------------------------------------------------

struct Normalizer {
  Vector mean, scale;

  static Normalizer fit(const Matrix& x) {
    Normalizer n;
    n.mean = x.colwise().mean().transpose();
    n.scale = ((x.rowwise() - n.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index i = 0; i < n.scale.size(); ++i)
      if (!(n.scale(i) > 1e-12)) n.scale(i) = 1.0;
    return n;
  }
  Matrix apply(const Matrix& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
  Vector apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }
};

struct OcsvmOptions {
  double nu = 0.1;
  double gamma = 0.1;
  double tol = 1e-6;
  long max_iter = 1000000;
};

struct OcsvmModel {
  Matrix support;  // rows
  Vector alpha;
  double rho = 0.0;
  double gamma = 0.1;
  double nu = 0.1;
  Normalizer normalizer;  // identity when fitted on raw rows
  long iterations = 0;

  double decision_normalized(const Vector& z) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < support.rows(); ++i)
      s += alpha(i) * std::exp(-gamma * (support.row(i).transpose() - z).squaredNorm());
    return s - rho;
  }
  // Positive inside the learned region, negative outside.
  double decision(const Vector& x) const {
    return decision_normalized(normalizer.mean.size() ? normalizer.apply(x) : x);
  }
};

inline Matrix rbf_kernel(const Matrix& x, double gamma) {
  const auto m = x.rows();
  Matrix k(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j)
      k(i, j) = k(j, i) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
  return k;
}

// Dual: min 1/2 a^T K a  s.t. 0 <= a_i <= 1/(nu m), sum a = 1, solved by
// pairwise (SMO) updates on the maximal violating pair.
inline OcsvmModel ocsvm_fit_normalized(const Matrix& z, const OcsvmOptions& opt) {
  const auto m = z.rows();
  if (m < 2) throw InvalidArgument("ocsvm_fit needs at least two rows");
  if (!(opt.nu > 0.0 && opt.nu <= 1.0)) throw InvalidArgument("nu must lie in (0, 1]");
  if (!(opt.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  const Matrix k = rbf_kernel(z, opt.gamma);
  const double c = 1.0 / (opt.nu * static_cast<double>(m));
  Vector alpha = Vector::Zero(m);
  double left = 1.0;
  for (Eigen::Index i = 0; i < m && left > 0.0; ++i) {
    alpha(i) = std::min(c, left);
    left -= alpha(i);
  }
  Vector grad = k * alpha;
  OcsvmModel model;
  long it = 0;
  double gap = 0.0;
  for (;; ++it) {
    Eigen::Index up = -1, down = -1;
    double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (alpha(i) < c && grad(i) < gmin) gmin = grad(i), up = i;
      if (alpha(i) > 0.0 && grad(i) > gmax) gmax = grad(i), down = i;
    }
    gap = gmax - gmin;
    if (up < 0 || down < 0 || gap <= opt.tol) break;
    if (it >= opt.max_iter) throw NumericError("ocsvm did not converge; KKT gap", gap);
    const double curv = std::max(k(up, up) + k(down, down) - 2.0 * k(up, down), 1e-12);
    const double delta = std::min({gap / curv, alpha(down), c - alpha(up)});
    alpha(up) += delta;
    alpha(down) -= delta;
    grad += delta * (k.col(up) - k.col(down));
  }
  // rho from free support vectors, else the middle of the feasible interval.
  double sum = 0.0;
  int free = 0;
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  const double eps = 1e-12;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (alpha(i) > eps && alpha(i) < c - eps) {
      sum += grad(i);
      ++free;
    } else if (alpha(i) <= eps) {
      hi = std::min(hi, grad(i));
    } else {
      lo = std::max(lo, grad(i));
    }
  }
  if (free) {
    model.rho = sum / free;
  } else if (std::isfinite(lo) && std::isfinite(hi)) {
    model.rho = 0.5 * (lo + hi);
  } else {
    model.rho = std::isfinite(lo) ? lo : hi;
  }
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < m; ++i)
    if (alpha(i) > 0.0) sv.push_back(i);
  model.support.resize(static_cast<Eigen::Index>(sv.size()), z.cols());
  model.alpha.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t j = 0; j < sv.size(); ++j) {
    model.support.row(static_cast<Eigen::Index>(j)) = z.row(sv[j]);
    model.alpha(static_cast<Eigen::Index>(j)) = alpha(sv[j]);
  }
  model.gamma = opt.gamma;
  model.nu = opt.nu;
  model.iterations = it;
  return model;
}

// z-scores the rows with their own mean/std, then fits.
inline OcsvmModel ocsvm_fit(const Matrix& x, const OcsvmOptions& opt = {}, bool standardize = true) {
  if (!standardize) return ocsvm_fit_normalized(x, opt);
  const auto norm = Normalizer::fit(x);
  auto model = ocsvm_fit_normalized(norm.apply(x), opt);
  model.normalizer = norm;
  return model;
}

inline Json to_json(const OcsvmModel& m) {
  Json sv = Json::array();
  for (Eigen::Index i = 0; i < m.support.rows(); ++i) {
    const Vector r = m.support.row(i).transpose();
    sv.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  }
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"support_vectors", sv},
          {"alphas", vec(m.alpha)},
          {"rho", m.rho},
          {"gamma", m.gamma},
          {"nu", m.nu},
          {"normalizer", {{"mean", vec(m.normalizer.mean)}, {"std", vec(m.normalizer.scale)}}}};
}

inline OcsvmModel ocsvm_from_json(const Json& j) {
  auto vec = [](const Json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  OcsvmModel m;
  const auto& sv = j.at("support_vectors");
  m.alpha = vec(j.at("alphas"));
  m.support.resize(static_cast<Eigen::Index>(sv.size()), sv.empty() ? 0 : static_cast<Eigen::Index>(sv[0].size()));
  for (std::size_t i = 0; i < sv.size(); ++i) m.support.row(static_cast<Eigen::Index>(i)) = vec(sv[i]).transpose();
  m.rho = j.at("rho").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.nu = j.at("nu").get<double>();
  m.normalizer.mean = vec(j.at("normalizer").at("mean"));
  m.normalizer.scale = vec(j.at("normalizer").at("std"));
  return m;
}

// ---------------------------------------------------------------------------

enum class ViewKind { metric, tsvd };

inline std::string to_string(ViewKind k) { return k == ViewKind::metric ? "metric" : "tsvd"; }

struct DetectorView {
  ViewKind kind = ViewKind::metric;
  double t = 1.0;
  int dim = kTsvdDim;
  OcsvmModel model;

  Vector featurize(const SignedGraph& g) const {
    return kind == ViewKind::metric ? metric_features(g, t) : tsvd_features(g, dim);
  }
  double score(const SignedGraph& g) const { return model.decision(featurize(g)); }
};

// Fits a view on clean graphs only. Graphs whose features are undefined are
// left out and their positions appended to `rejected`.
inline DetectorView fit_view(ViewKind kind, const std::vector<SignedGraph>& clean, double t = 1.0,
                             const OcsvmOptions& opt = {}, std::vector<std::size_t>* rejected = nullptr) {
  DetectorView v;
  v.kind = kind;
  v.t = t;
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    try {
      rows.push_back(v.featurize(clean[i]));
    } catch (const UndefinedMetric&) {
      if (rejected) rejected->push_back(i);
    }
  }
  if (rows.size() < 2) throw InvalidArgument("fit_view: fewer than two usable clean graphs");
  Matrix x(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  v.model = ocsvm_fit(x, opt);
  return v;
}

enum class Strategy { mean, min, max };

inline std::string to_string(Strategy s) {
  return s == Strategy::mean ? "mean" : (s == Strategy::min ? "min" : "max");
}

inline Strategy parse_strategy(const std::string& s) {
  for (auto k : {Strategy::mean, Strategy::min, Strategy::max})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown ensemble strategy '" + s + "'");
}

inline Vector min_max_normalize(const Vector& s) {
  const double lo = s.minCoeff(), hi = s.maxCoeff();
  if (hi - lo <= 0.0) return Vector::Zero(s.size());
  return (s.array() - lo) / (hi - lo);
}

struct EvalRow {
  std::string id;
  Vector view_scores;  // normalized, one per view
  double combined = 0.0;
  int label = 1;  // +1 normal, -1 anomaly
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> views;
  std::vector<double> view_auc;
  double auc = 0.0;
  Strategy strategy = Strategy::max;
};

// Raw decision scores of every evaluation graph under every view.
inline Matrix score_matrix(const std::vector<const SignedGraph*>& graphs, const std::vector<DetectorView>& views) {
  Matrix s(static_cast<Eigen::Index>(graphs.size()), static_cast<Eigen::Index>(views.size()));
  for (std::size_t i = 0; i < graphs.size(); ++i)
    for (std::size_t v = 0; v < views.size(); ++v)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = views[v].score(*graphs[i]);
  return s;
}

// AUC with anomalies as the positive class, scored by the negated combination.
inline EvalReport evaluate_scores(const Matrix& raw, const std::vector<int>& labels, Strategy strategy,
                                  const std::vector<std::string>& view_names, const std::vector<std::string>& ids) {
  if (raw.cols() == 0) throw InvalidArgument("detector_eval needs at least one view");
  std::vector<int> anomaly;
  for (int l : labels) anomaly.push_back(l < 0 ? 1 : 0);
  EvalReport rep;
  rep.strategy = strategy;
  rep.views = view_names;
  Matrix norm(raw.rows(), raw.cols());
  for (Eigen::Index v = 0; v < raw.cols(); ++v) {
    norm.col(v) = min_max_normalize(raw.col(v));
    rep.view_auc.push_back(auc(Vector(-norm.col(v)), anomaly));
  }
  Vector combined(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const auto r = norm.row(i);
    combined(i) = strategy == Strategy::mean ? r.mean() : (strategy == Strategy::min ? r.minCoeff() : r.maxCoeff());
    rep.rows.push_back({ids[static_cast<std::size_t>(i)], r.transpose(), combined(i), labels[static_cast<std::size_t>(i)]});
  }
  rep.auc = auc(Vector(-combined), anomaly);
  return rep;
}

// Scores clean + poisoned graphs with views fitted on the clean corpus.
inline EvalReport detector_eval(const std::vector<SignedGraph>& clean, const std::vector<SignedGraph>& poisoned,
                                const std::vector<DetectorView>& views, Strategy strategy) {
  if (clean.empty() || poisoned.empty()) throw UndefinedMetric("detector_eval needs clean and poisoned graphs");
  std::vector<const SignedGraph*> all;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    all.push_back(&clean[i]);
    labels.push_back(1);
    ids.push_back("clean-" + std::to_string(i));
  }
  for (std::size_t i = 0; i < poisoned.size(); ++i) {
    all.push_back(&poisoned[i]);
    labels.push_back(-1);
    ids.push_back("poisoned-" + std::to_string(i));
  }
  std::vector<std::string> names;
  for (const auto& v : views) names.push_back(to_string(v.kind));
  return evaluate_scores(score_matrix(all, views), labels, strategy, names, ids);
}

inline void write_report_csv(std::ostream& out, const EvalReport& rep) {
  out << "graph";
  for (const auto& v : rep.views) out << ',' << v;
  out << ",combined,label\n";
  out.precision(10);
  for (const auto& r : rep.rows) {
    out << r.id;
    for (Eigen::Index v = 0; v < r.view_scores.size(); ++v) out << ',' << r.view_scores(v);
    out << ',' << r.combined << ',' << r.label << '\n';
  }
}

}  // namespace sga::detect
