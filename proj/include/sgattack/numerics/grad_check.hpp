#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "tape.hpp"

namespace sga::ad {

// Scalar function of one matrix argument, built on the given tape.
using ScalarFunction = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  Eigen::Index row = -1;
  Eigen::Index col = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Tape gradient of f at x.
inline Matrix tape_gradient(const ScalarFunction& f, const Matrix& x) {
  Tape t;
  Var in = t.variable(x);
  Var out = f(t, in);
  t.backward(out);
  return t.gradient(in);
}

inline double evaluate(const ScalarFunction& f, const Matrix& x) {
  Tape t;
  return f(t, t.constant(x)).scalar();
}

// Compares the tape gradient with central differences of step h, entry by
// entry (all entries, or only `entries` when given). Relative error uses the
// denominator max(|tape gradient|, 1e-8).
inline GradCheckResult grad_check(const ScalarFunction& f, const Matrix& x, double h = 1e-5,
                                  const std::optional<std::vector<std::pair<int, int>>>& entries = std::nullopt) {
  const Matrix g = tape_gradient(f, x);
  std::vector<std::pair<int, int>> todo;
  if (entries) {
    todo = *entries;
  } else {
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r) todo.emplace_back(static_cast<int>(r), static_cast<int>(c));
  }
  GradCheckResult res;
  Matrix probe = x;
  for (auto [r, c] : todo) {
    const double orig = probe(r, c);
    probe(r, c) = orig + h;
    const double up = evaluate(f, probe);
    probe(r, c) = orig - h;
    const double down = evaluate(f, probe);
    probe(r, c) = orig;
    const double num = (up - down) / (2.0 * h);
    const double err = std::abs(num - g(r, c)) / std::max(std::abs(g(r, c)), 1e-8);
    ++res.checked;
    if (err > res.max_rel_error || res.row < 0) {
      res.max_rel_error = std::max(err, res.max_rel_error);
      if (err >= res.max_rel_error) {
        res.row = r;
        res.col = c;
        res.analytic = g(r, c);
        res.numeric = num;
      }
    }
  }
  return res;
}

}  // namespace sga::ad
