#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "balance.hpp"
#include "fextra.hpp"
#include "graph.hpp"
#include "jsonlib.hpp"
#include "numerics/ops.hpp"
#include "pole.hpp"
#include "rng.hpp"

namespace sga::attack {

enum class Target { fextra_ols, fextra_meta, pole_sym, pole_unsym };

inline std::string to_string(Target t) {
  switch (t) {
    case Target::fextra_ols: return "fextra-ols";
    case Target::fextra_meta: return "fextra-meta";
    case Target::pole_sym: return "pole-sym";
    case Target::pole_unsym: return "pole-unsym";
  }
  return "?";
}

inline Target parse_target(const std::string& s) {
  for (auto t : {Target::fextra_ols, Target::fextra_meta, Target::pole_sym, Target::pole_unsym})
    if (to_string(t) == s) return t;
  throw InvalidArgument("unknown attack target '" + s + "'");
}

inline bool is_pole(Target t) { return t == Target::pole_sym || t == Target::pole_unsym; }

enum class Reduction { mean, sum };

struct AttackConfig {
  std::size_t budget = 0;
  double lambda = 0.0;
  double eta = 0.0;
  int inner_L = -1;  // -1: 100 for fextra-meta, 50 for the pole factorization
  double inner_lr = 0.01;
  double t = 1.0;            // Markov time of the Pol penalty
  double pole_t = 4.0;       // Markov time of the attacked pole model
  int dim = 32;              // factorization rank
  std::uint64_t seed = 0;
  std::vector<double> checkpoints;  // powers, fractions of |E|
  Reduction reduction = Reduction::sum;
  fextra::OlsOptions ols{};
  fextra::FextraOptions victim_fextra{};
  pole::PoleOptions victim_pole{};
};

inline int inner_iterations(const AttackConfig& c, Target t) {
  if (c.inner_L >= 0) return c.inner_L;
  return is_pole(t) ? 50 : 100;
}

inline std::size_t budget_for_power(double power, std::size_t edges, std::size_t train) {
  if (power < 0.0) throw InvalidArgument("attack power must be non-negative");
  return std::min(static_cast<std::size_t>(std::llround(power * static_cast<double>(edges))), train);
}

struct Flip {
  int u = 0, v = 0;
  int step = 0;
  double gain = 0.0;  // predicted first-order loss increase (balanced-triad loss for the greedy baseline)
};

struct Snapshot {
  double power = 0.0;
  std::size_t flips = 0;
  SignedGraph graph;
};

struct AttackTrace {
  std::string attack;
  std::vector<Flip> flips;
  std::vector<double> loss_curve;
  std::vector<Snapshot> snapshots;
  std::vector<std::size_t> pool;  // edge indices already flipped
  std::vector<std::vector<std::size_t>> ordering;  // per-step ranking (kept only when requested)
  std::vector<std::string> log;
  SignedGraph poisoned;
};

inline Json to_json(const AttackTrace& t) {
  Json flips = Json::array();
  for (const auto& f : t.flips) flips.push_back({{"u", f.u}, {"v", f.v}, {"step", f.step}, {"gain", f.gain}});
  Json snaps = Json::array();
  for (const auto& s : t.snapshots) snaps.push_back({{"power", s.power}, {"flips", s.flips}});
  return {{"attack", t.attack}, {"flips", flips}, {"loss_curve", t.loss_curve}, {"checkpoints", snaps}, {"log", t.log}};
}

// ---------------------------------------------------------------------------
// Self-training labels

inline std::vector<int> threshold_labels(const Vector& p) {
  std::vector<int> y(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) y[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
  return y;
}

// Victim probabilities on the test links of a (possibly poisoned) graph.
inline Vector victim_predict(const SignedGraph& g, const EdgeSplit& split, Target t, const AttackConfig& cfg) {
  const auto test = edge_pairs(g, split.test);
  if (is_pole(t)) {
    auto opt = cfg.victim_pole;
    opt.walk.mode = pole::WalkMode::unsym;
    return pole::pole_predict(g, split, test, opt);
  }
  return fextra::fextra_predict(g, split, test, cfg.victim_fextra);
}

// The clean victim's thresholded test predictions; ties at 0.5 count as positive.
inline fextra::LabelVector self_train_labels(const SignedGraph& g, const EdgeSplit& split, Target t,
                                             const AttackConfig& cfg) {
  return {threshold_labels(victim_predict(g, split, t, cfg)), fextra::LabelRole::self_trained};
}

// ---------------------------------------------------------------------------
// Attack losses on the tape. X is the observed adjacency (test links zero).

struct AttackProblem {
  Matrix mask;  // |A| including test links
  std::vector<NodePair> train, test;
  Vector yhat;  // 0/1 self-trained labels for test
  Target target = Target::fextra_ols;
  AttackConfig cfg;
  Matrix u0;  // factorization start for pole targets
};

inline AttackProblem make_problem(const SignedGraph& g, const EdgeSplit& split, const fextra::LabelVector& yhat,
                                  Target target, const AttackConfig& cfg) {
  AttackProblem p;
  p.mask = g.unsigned_adjacency();
  p.train = edge_pairs(g, split.train);
  p.test = edge_pairs(g, split.test);
  if (yhat.values.size() != p.test.size()) throw InvalidArgument("label count does not match test links");
  p.yhat = Vector(static_cast<Eigen::Index>(p.test.size()));
  for (std::size_t i = 0; i < p.test.size(); ++i) p.yhat(static_cast<Eigen::Index>(i)) = yhat.values[i];
  p.target = target;
  p.cfg = cfg;
  if (is_pole(target)) p.u0 = pole::initial_factor(g.num_nodes(), std::min(cfg.dim, g.num_nodes()), cfg.seed);
  return p;
}

// sum or mean of yhat log p + (1 - yhat) log(1 - p), logs clipped at 1e-12.
inline ad::Var log_likelihood(ad::Tape& t, ad::Var p, const Vector& yhat, Reduction r) {
  const ad::Var pc = ad::clamp(p, 1e-12, 1.0 - 1e-12);
  const ad::Var y = t.constant(yhat);
  const ad::Var one_minus_y = t.constant((1.0 - yhat.array()).matrix());
  const ad::Var ll = ad::add(ad::mul(y, ad::log(pc)), ad::mul(one_minus_y, ad::log(ad::add_scalar(ad::neg(pc), 1.0))));
  return r == Reduction::mean ? ad::mean(ll) : ad::sum(ll);
}

namespace detail {

// Standardized [1, z] design. Shift and scale come from the training rows and
// stay on the tape, so the unrolled gradient sees them move with X.
inline std::pair<ad::Var, ad::Var> standardized_designs(ad::Tape& t, ad::Var ftr, ad::Var fte) {
  const ad::Var ltr = ad::log(ad::add_scalar(ftr, 1.0));
  const ad::Var lte = ad::log(ad::add_scalar(fte, 1.0));
  const auto m = static_cast<double>(ltr.rows());
  const ad::Var centered_t = ad::center_rows(ad::transpose(ltr));  // k x m
  const ad::Var var = ad::scale(ad::row_sums(ad::mul(centered_t, centered_t)), 1.0 / m);
  // constant columns keep unit scale, as in lr_train
  Vector pad = Vector::Zero(var.rows());
  for (Eigen::Index i = 0; i < pad.size(); ++i)
    if (!(std::sqrt(var.value()(i, 0)) > 1e-12)) pad(i) = 1.0;
  const ad::Var inv = ad::div(t.constant(Matrix::Ones(pad.size(), 1)), ad::sqrt(ad::add(var, t.constant(pad))));
  const ad::Var shift = ad::scale(ad::row_sums(ad::transpose(ltr)), 1.0 / m);  // k x 1
  auto design = [&](ad::Var l) {
    const ad::Var ones_row = t.constant(Matrix::Ones(1, l.rows()));
    const ad::Var zt = ad::mul(ad::sub(ad::transpose(l), ad::matmul(shift, ones_row)), ad::matmul(inv, ones_row));
    return ad::concat_cols({t.constant(Matrix::Ones(l.rows(), 1)), ad::transpose(zt)});
  };
  return {design(ltr), design(lte)};
}

}  // namespace detail

// FeXtra attack loss (log-likelihood form): theta* from the closed-form OLS
// surrogate or from inner_L unrolled gradient steps, then the likelihood of
// the self-trained labels on the test links. Training labels are the
// relaxed signs X[u, v] of the training links.
inline ad::Var attack_loss_fextra(ad::Tape& t, ad::Var x, const AttackProblem& p) {
  // one feature pass over train then test links
  std::vector<NodePair> links = p.train;
  links.insert(links.end(), p.test.begin(), p.test.end());
  const ad::Var f = fextra::features_on_tape(t, x, p.mask, links);
  std::vector<int> rows_tr(p.train.size()), rows_te(p.test.size());
  std::iota(rows_tr.begin(), rows_tr.end(), 0);
  std::iota(rows_te.begin(), rows_te.end(), static_cast<int>(p.train.size()));
  const ad::Var ftr = ad::take_rows(f, std::move(rows_tr));
  const ad::Var fte = ad::take_rows(f, std::move(rows_te));
  const ad::Var signs = ad::gather(x, p.train);
  ad::Var prob;
  if (p.target == Target::fextra_ols) {
    const ad::Var ztr = fextra::log_design_on_tape(t, ftr);
    const ad::Var zte = fextra::log_design_on_tape(t, fte);
    const ad::Var theta = fextra::ols_theta_on_tape(t, ztr, signs, p.cfg.ols);
    prob = ad::sigmoid(ad::matmul(zte, theta));
  } else if (p.target == Target::fextra_meta) {
    const auto [ztr, zte] = detail::standardized_designs(t, ftr, fte);
    const ad::Var y = ad::scale(ad::add_scalar(signs, 1.0), 0.5);
    const ad::Var ztr_t = ad::transpose(ztr);
    ad::Var theta = t.constant(fextra::initial_theta(ztr.cols(), fextra::ThetaInit::uniform, p.cfg.seed));
    const double step = p.cfg.inner_lr / static_cast<double>(ztr.rows());
    for (int l = 0; l < inner_iterations(p.cfg, p.target); ++l) {
      const ad::Var resid = ad::sub(ad::sigmoid(ad::matmul(ztr, theta)), y);
      theta = ad::sub(theta, ad::scale(ad::matmul(ztr_t, resid), step));
    }
    prob = ad::sigmoid(ad::matmul(zte, theta));
  } else {
    throw InvalidArgument("attack_loss_fextra: not a fextra target");
  }
  return log_likelihood(t, prob, p.yhat, p.cfg.reduction);
}

// POLE attack loss: R_sign -> unrolled factorization -> cosine P on the test
// links -> likelihood of the self-trained labels.
inline ad::Var attack_loss_pole(ad::Tape& t, ad::Var x, const AttackProblem& p) {
  if (!is_pole(p.target)) throw InvalidArgument("attack_loss_pole: not a pole target");
  const Vector d = pole::walk_degrees(p.mask);
  const pole::WalkParams wp{p.cfg.pole_t, p.target == Target::pole_sym ? pole::WalkMode::sym : pole::WalkMode::unsym};
  const ad::Var r = pole::autocovariance_on_tape(pole::transition_on_tape(t, x, d, wp), d);
  const ad::Var u = pole::factorize_on_tape(t, r, p.u0, inner_iterations(p.cfg, p.target), p.cfg.inner_lr);
  return log_likelihood(t, pole::cosine_probabilities_on_tape(r, u, p.test), p.yhat, p.cfg.reduction);
}

inline ad::Var attack_loss(ad::Tape& t, ad::Var x, const AttackProblem& p) {
  return is_pole(p.target) ? attack_loss_pole(t, x, p) : attack_loss_fextra(t, x, p);
}

// base + lambda T + eta Pol, measured on the observed graph (the attacker's
// view; its mask is |X|). A term whose metric is undefined contributes 0.
inline ad::Var penalized_loss(ad::Tape& t, ad::Var base, ad::Var x, double lambda, double eta, double markov_t,
                              std::vector<std::string>* log = nullptr) {
  if (lambda < 0.0 || eta < 0.0) throw InvalidArgument("penalty weights must be non-negative");
  ad::Var out = base;
  const Matrix mask = x.value().cwiseAbs();
  if (lambda > 0.0) {
    try {
      out = ad::add(out, ad::scale(balance::balance_on_tape(x, mask), lambda));
    } catch (const UndefinedMetric& e) {
      if (log) log->push_back(std::string("lambda term dropped: ") + e.what());
    }
  }
  if (eta > 0.0) {
    try {
      out = ad::add(out, ad::scale(balance::polarization_on_tape(t, x, mask, {markov_t, pole::WalkMode::sym}), eta));
    } catch (const UndefinedMetric& e) {
      if (log) log->push_back(std::string("eta term dropped: ") + e.what());
    }
  }
  return out;
}

// Objective maximized by the attacker: cross-entropy of the self-trained
// labels plus the penalties.
inline ad::Var attack_objective(ad::Tape& t, ad::Var x, const AttackProblem& p, std::vector<std::string>* log = nullptr) {
  return penalized_loss(t, ad::neg(attack_loss(t, x, p)), x, p.cfg.lambda, p.cfg.eta, p.cfg.t, log);
}

inline double attack_objective_value(const Matrix& observed, const AttackProblem& p) {
  ad::Tape t;
  return attack_objective(t, t.constant(observed), p).scalar();
}

// ---------------------------------------------------------------------------
// Attack loops

namespace detail {

inline std::vector<std::size_t> checkpoint_counts(const std::vector<double>& powers, std::size_t edges,
                                                  std::size_t train) {
  std::vector<std::size_t> c;
  for (double pw : powers) c.push_back(budget_for_power(pw, edges, train));
  return c;
}

// Runs `budget` steps; `choose` returns the edge index to flip and its score.
template <class Choose>
AttackTrace run_flips(const SignedGraph& g0, const EdgeSplit& split, std::size_t budget,
                      const std::vector<double>& checkpoints, std::string name, Choose&& choose) {
  if (budget > split.train.size()) throw InvalidArgument("budget exceeds the number of training links");
  AttackTrace tr;
  tr.attack = std::move(name);
  const auto counts = checkpoint_counts(checkpoints, g0.num_edges(), split.train.size());
  std::vector<int> signs = g0.signs();
  std::vector<char> in_pool(g0.num_edges(), 0);
  SignedGraph g = g0;
  auto snapshot = [&] {
    for (std::size_t k = 0; k < counts.size(); ++k)
      if (counts[k] == tr.flips.size()) tr.snapshots.push_back({checkpoints[k], counts[k], g});
  };
  snapshot();
  for (std::size_t step = 0; step < budget; ++step) {
    const auto [idx, score, loss] = choose(g, in_pool, tr);
    if (in_pool[idx]) throw Error("attack chose a link already in the pool");
    const auto& e = g.edge(idx);
    tr.flips.push_back({e.u, e.v, static_cast<int>(step), score});
    if (loss) tr.loss_curve.push_back(*loss);
    in_pool[idx] = 1;
    tr.pool.push_back(idx);
    signs[idx] = -signs[idx];
    g = g.with_signs(signs);
    snapshot();
  }
  tr.poisoned = g;
  return tr;
}

struct Choice {
  std::size_t idx;
  double score;
  std::optional<double> loss;
};

}  // namespace detail

// First-order score of flipping each (u, v): (-2 s_uv)(G[u, v] + G[v, u]).
inline std::vector<double> flip_scores(const Matrix& grad, const SignedGraph& g, const std::vector<std::size_t>& links) {
  std::vector<double> s;
  s.reserve(links.size());
  for (auto i : links) {
    const auto& e = g.edge(i);
    s.push_back(-2.0 * e.sign * (grad(e.u, e.v) + grad(e.v, e.u)));
  }
  return s;
}

// Greedy gradient attack: each step re-evaluates the objective on the current
// poisoned graph and flips the unpooled training link with the largest
// predicted increase (ties to the smallest (u, v)).
inline AttackTrace flip_attack(const SignedGraph& g0, const EdgeSplit& split, Target target, const AttackConfig& cfg,
                               const std::optional<fextra::LabelVector>& labels = std::nullopt) {
  const auto yhat = labels ? *labels : self_train_labels(g0, split, target, cfg);
  const AttackProblem prob = make_problem(g0, split, yhat, target, cfg);
  auto choose = [&](const SignedGraph& g, const std::vector<char>& pool, AttackTrace& tr) {
    ad::Tape t;
    const ad::Var x = t.variable(observed_adjacency(g, split));
    const ad::Var obj = attack_objective(t, x, prob, &tr.log);
    if (!std::isfinite(obj.scalar())) throw NumericError("attack objective is not finite", obj.scalar());
    t.backward(obj);
    const Matrix grad = t.gradient(x);
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (auto i : split.train) {
      if (pool[i]) continue;
      const auto& e = g.edge(i);
      const double s = -2.0 * e.sign * (grad(e.u, e.v) + grad(e.v, e.u));
      if (!best || s > best_score) {
        best = i;
        best_score = s;
      }
    }
    if (best_score <= 0.0)
      tr.log.push_back("step " + std::to_string(tr.flips.size()) + ": no positive score, least-bad flip taken");
    return detail::Choice{*best, best_score, obj.scalar()};
  };
  return detail::run_flips(g0, split, cfg.budget, cfg.checkpoints, to_string(target), choose);
}

inline AttackTrace baseline_rand(const SignedGraph& g0, const EdgeSplit& split, std::size_t budget, std::uint64_t seed,
                                 const std::vector<double>& checkpoints = {}) {
  if (budget > split.train.size()) throw InvalidArgument("budget exceeds the number of training links");
  auto order = split.train;
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t k = 0;
  auto choose = [&](const SignedGraph&, const std::vector<char>&, AttackTrace&) {
    return detail::Choice{order[k++], 0.0, std::nullopt};
  };
  return detail::run_flips(g0, split, budget, checkpoints, "rand", choose);
}

// Flips the training link whose flip removes the most balanced triads.
inline AttackTrace baseline_greedy_triads(const SignedGraph& g0, const EdgeSplit& split, std::size_t budget,
                                          const std::vector<double>& checkpoints = {}) {
  auto choose = [&](const SignedGraph& g, const std::vector<char>& pool, AttackTrace&) {
    std::optional<std::size_t> best;
    std::int64_t best_delta = 0;
    for (auto i : split.train) {
      if (pool[i]) continue;
      const auto& e = g.edge(i);
      const auto d = balance::flip_balance_delta(g, e.u, e.v);
      if (!best || d < best_delta) {
        best = i;
        best_delta = d;
      }
    }
    return detail::Choice{*best, static_cast<double>(-best_delta), std::nullopt};
  };
  return detail::run_flips(g0, split, budget, checkpoints, "greedy-triads", choose);
}

}  // namespace sga::attack
