// Copyright 2026 The Groupwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROUPWISE__MODELING__METRICS_HPP_
#define GROUPWISE__MODELING__METRICS_HPP_

#include "groupwise/core/error.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace groupwise::modeling
{

inline constexpr const char * kModule = "modeling";

/// Area under the ROC curve via the rank-sum statistic with mid-ranks for
/// ties. Computed in doubled integer ranks so it agrees exactly with
/// counting wins plus half-ties over all positive/negative pairs.
inline double auc(std::span<const double> scores, std::span<const int> labels)
{
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::uint64_t n_pos = 0;
  for (int y : labels) n_pos += y == 1 ? 1 : 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw NumericError(kModule, "AUC undefined: only one class present");
  }
  // Sum over positives of twice their 1-based mid-rank.
  std::uint64_t rank2_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_mid = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank2_sum += twice_mid;
    }
    i = j + 1;
  }
  const std::uint64_t u2 = rank2_sum - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct Metrics
{
  double auc = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double acc = 0.0;
};

/// AUC plus confusion-based rates at \p threshold (score >= threshold is
/// predicted positive).
inline Metrics evaluate_scores(
  std::span<const double> scores, std::span<const int> labels, double threshold = 0.5)
{
  Metrics m;
  m.auc = auc(scores, labels);
  std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++pos;
      tp += pred ? 1 : 0;
    } else {
      ++neg;
      tn += pred ? 0 : 1;
    }
  }
  m.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  m.tnr = static_cast<double>(tn) / static_cast<double>(neg);
  m.acc = static_cast<double>(tp + tn) / static_cast<double>(pos + neg);
  return m;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__METRICS_HPP_
