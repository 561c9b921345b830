#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace sga {

// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores
// contribute one half. labels are 0/1 with 1 the positive class.
inline double auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(scores.size());
  if (labels.size() != n) throw InvalidArgument("auc: score/label length mismatch");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument("auc: labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t negs = n - pos;
  if (pos == 0 || negs == 0) throw UndefinedMetric("auc undefined: only one class present");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) == scores(static_cast<Eigen::Index>(order[i]))) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(negs);
  return (rank_sum - p * (p + 1) / 2.0) / (p * q);
}

inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  return auc(Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size())), labels);
}

}  // namespace sga
