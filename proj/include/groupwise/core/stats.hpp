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

#ifndef GROUPWISE__CORE__STATS_HPP_
#define GROUPWISE__CORE__STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace groupwise::stats
{

inline double mean(std::span<const double> xs)
{
  if (xs.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (double x : xs) {
    s += x;
  }
  return s / static_cast<double>(xs.size());
}

/// Population standard deviation (divides by n).
inline double pop_std(std::span<const double> xs)
{
  if (xs.size() < 2) {
    return 0.0;
  }
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) {
    ss += (x - m) * (x - m);
  }
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// Nearest-rank percentile of an already sorted sample: the value at
/// 1-based rank ceil(p/100 * n), with rank clamped to [1, n].
inline double nearest_rank_sorted(std::span<const double> sorted, double pct)
{
  if (sorted.empty()) {
    throw std::invalid_argument("percentile of empty sample");
  }
  const double n = static_cast<double>(sorted.size());
  // Guard the ceil against 97/100*100 landing a hair above 97.
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline double nearest_rank(std::vector<double> xs, double pct)
{
  std::sort(xs.begin(), xs.end());
  return nearest_rank_sorted(xs, pct);
}

inline double pearson(std::span<const double> a, std::span<const double> b)
{
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    return 0.0;
  }
  return sab / std::sqrt(saa * sbb);
}

/// Two-sided p-value of a standard normal statistic.
inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace groupwise::stats

#endif  // GROUPWISE__CORE__STATS_HPP_
