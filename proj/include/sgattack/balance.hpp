#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "graph.hpp"
#include "jsonlib.hpp"
#include "numerics/ops.hpp"
#include "pole.hpp"

namespace sga::balance {

namespace detail {

// tr(X^3) for a symmetric sparse X, as sum_ij (X^2)_ij X_ij.
inline double trace_cubed(const Eigen::SparseMatrix<double>& x) {
  const Eigen::SparseMatrix<double> x2 = x * x;
  return x2.cwiseProduct(x).sum();
}

}  // namespace detail

// Tr(A^3) and Tr(|A|^3). Both are exact integers at any realistic size.
struct TraceTerms {
  double signed_trace = 0.0;
  double unsigned_trace = 0.0;
};

inline TraceTerms trace_terms(const SignedGraph& g) {
  return {detail::trace_cubed(g.sparse_adjacency(true)), detail::trace_cubed(g.sparse_adjacency(false))};
}

// T = (Tr(A^3) + Tr(|A|^3)) / (2 Tr(|A|^3)).
inline double balance_ratio(const SignedGraph& g) {
  const auto tt = trace_terms(g);
  if (tt.unsigned_trace == 0.0) throw UndefinedMetric("balance ratio undefined: graph has no triads");
  return (tt.signed_trace + tt.unsigned_trace) / (2.0 * tt.unsigned_trace);
}

struct TriadCensus {
  std::int64_t balanced = 0;
  std::int64_t unbalanced = 0;
  std::array<std::int64_t, 4> by_type{};  // index = number of negative edges

  std::int64_t total() const { return balanced + unbalanced; }
  double ratio() const {
    if (total() == 0) throw UndefinedMetric("triad census empty");
    return static_cast<double>(balanced) / static_cast<double>(total());
  }
};

// Enumerates every triangle u < v < w once through sorted adjacency lists.
inline TriadCensus triad_census(const SignedGraph& g) {
  TriadCensus c;
  for (const auto& e : g.edges()) {
    const auto& nu = g.neighbors(e.u);
    const auto& nv = g.neighbors(e.v);
    auto i = nu.begin(), j = nv.begin();
    while (i != nu.end() && j != nv.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        const int w = *i;
        if (w > e.v) {
          const int negatives = (e.sign < 0) + (g.sign(e.u, w) < 0) + (g.sign(e.v, w) < 0);
          ++c.by_type[static_cast<std::size_t>(negatives)];
          (negatives % 2 == 0 ? c.balanced : c.unbalanced) += 1;
        }
        ++i;
        ++j;
      }
    }
  }
  return c;
}

// Change in the balanced-triad count if the edge (u, v) were flipped: every
// triad through it switches status.
inline std::int64_t flip_balance_delta(const SignedGraph& g, int u, int v) {
  const int s = g.sign(u, v);
  if (s == 0) throw MissingEdge(u, v);
  const auto& nu = g.neighbors(u);
  const auto& nv = g.neighbors(v);
  std::int64_t delta = 0;
  auto i = nu.begin(), j = nv.begin();
  while (i != nu.end() && j != nv.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      delta += s * g.sign(u, *i) * g.sign(v, *i) > 0 ? -1 : 1;
      ++i;
      ++j;
    }
  }
  return delta;
}

// T on the tape. |A| is a constant mask, so c = Tr(|A|^3) is a constant.
inline ad::Var balance_on_tape(ad::Var a, const Matrix& mask) {
  const double c = (mask * mask).cwiseProduct(mask).sum();
  if (c == 0.0) throw UndefinedMetric("balance ratio undefined: graph has no triads");
  return ad::add_scalar(ad::scale(ad::trace_of_product(ad::matmul(a, a), a), 1.0 / (2.0 * c)), 0.5);
}

// ---------------------------------------------------------------------------
// Polarization

inline constexpr double kVarianceFloor = 1e-12;

// Pearson correlation; nullopt when either input has (numerically) zero variance.
inline std::optional<double> pearson(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const Vector cx = x.array() - x.mean();
  const Vector cy = y.array() - y.mean();
  const double nx = cx.norm(), ny = cy.norm();
  if (nx <= kVarianceFloor * (1.0 + x.cwiseAbs().maxCoeff()) || ny <= kVarianceFloor * (1.0 + y.cwiseAbs().maxCoeff()))
    return std::nullopt;
  return std::clamp(cx.dot(cy) / (nx * ny), -1.0, 1.0);
}

struct Polarization {
  Vector nodes;               // NaN where undefined
  std::vector<int> undefined;  // nodes skipped for zero variance
  std::optional<double> graph;
};

// Pol(u, t) = corr(M_sign[u, :], M_abs[u, :]) and their mean over defined nodes.
inline Polarization polarization(const SignedGraph& g, double t, pole::WalkMode mode = pole::WalkMode::unsym) {
  const pole::WalkParams p{t, mode};
  const Matrix ms = pole::signed_transition(g, p, true);
  const Matrix ma = pole::signed_transition(g, p, false);
  Polarization out;
  out.nodes = Vector::Constant(g.num_nodes(), std::nan(""));
  double sum = 0.0;
  int defined = 0;
  for (int u = 0; u < g.num_nodes(); ++u) {
    const auto r = pearson(ms.row(u).transpose(), ma.row(u).transpose());
    if (!r) {
      out.undefined.push_back(u);
      continue;
    }
    out.nodes(u) = *r;
    sum += *r;
    ++defined;
  }
  if (defined) out.graph = sum / defined;
  return out;
}

inline std::optional<double> node_polarization(const SignedGraph& g, double t, int u) {
  if (u < 0 || u >= g.num_nodes()) throw InvalidArgument("node_polarization: node out of range");
  const auto p = polarization(g, t);
  if (std::isnan(p.nodes(u))) return std::nullopt;
  return p.nodes(u);
}

inline double graph_polarization(const SignedGraph& g, double t, pole::WalkMode mode = pole::WalkMode::unsym) {
  const auto p = polarization(g, t, mode);
  if (!p.graph) throw UndefinedMetric("polarization undefined for every node");
  return *p.graph;
}

// Mean Pol over nodes on the tape, with the signed transition recorded from A.
// Nodes with an undefined value (judged on the current values) are left out.
inline ad::Var polarization_on_tape(ad::Tape& tape, ad::Var a, const Matrix& mask, const pole::WalkParams& p) {
  const Vector d = pole::walk_degrees(mask);
  const ad::Var ms = ad::center_rows(pole::transition_on_tape(tape, a, d, p));
  const Matrix ma_val = pole::transition(mask, d, p);
  const Matrix ca = ma_val.colwise() - ma_val.rowwise().mean();
  std::vector<int> keep;
  for (Eigen::Index u = 0; u < ca.rows(); ++u) {
    if (pearson(ms.value().row(u).transpose(), ma_val.row(u).transpose()))
      keep.push_back(static_cast<int>(u));
  }
  if (keep.empty()) throw UndefinedMetric("polarization undefined for every node");
  const Vector na = ca.rowwise().norm().cwiseMax(kVarianceFloor);
  const ad::Var num = ad::row_sums(ad::mul(ms, tape.constant(ca)));
  const ad::Var den = ad::scale_rows(ad::row_norms(ms, kVarianceFloor), na);
  return ad::mean(ad::take_rows(ad::div(num, den), keep));
}

// ---------------------------------------------------------------------------

struct BalanceReport {
  std::optional<double> T;
  std::int64_t total_triads = 0;
  std::int64_t balanced_triads = 0;
  Vector pol_nodes;
  std::vector<int> pol_undefined;
  std::optional<double> pol_graph;
  double t = 1.0;
};

inline BalanceReport balance_report(const SignedGraph& g, double t) {
  BalanceReport r;
  const auto c = triad_census(g);
  r.total_triads = c.total();
  r.balanced_triads = c.balanced;
  if (c.total() > 0) r.T = balance_ratio(g);
  const auto p = polarization(g, t);
  r.pol_nodes = p.nodes;
  r.pol_undefined = p.undefined;
  r.pol_graph = p.graph;
  r.t = t;
  return r;
}

inline Json to_json(const BalanceReport& r) {
  Json j;
  j["T"] = r.T ? Json(*r.T) : Json(nullptr);
  j["total_triads"] = r.total_triads;
  j["balanced_triads"] = r.balanced_triads;
  Json nodes = Json::array();
  for (Eigen::Index i = 0; i < r.pol_nodes.size(); ++i)
    nodes.push_back(std::isnan(r.pol_nodes(i)) ? Json(nullptr) : Json(r.pol_nodes(i)));
  j["Pol_nodes"] = nodes;
  j["Pol_graph"] = r.pol_graph ? Json(*r.pol_graph) : Json(nullptr);
  j["Pol_undefined"] = r.pol_undefined;
  j["t"] = r.t;
  return j;
}

}  // namespace sga::balance
