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

#ifndef GROUPWISE__MODELING__PREPROCESS_HPP_
#define GROUPWISE__MODELING__PREPROCESS_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/core/rng.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/features.hpp"
#include "groupwise/modeling/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace groupwise::modeling
{

struct PreprocessSpec
{
  double winsor_low = 1.0;    // percentile
  double winsor_high = 99.0;  // percentile
  // Keep at most this many non-cases per case (binary labels only); 0 disables.
  double downsample_ratio = 4.0;
  double train_fraction = 0.7;
  std::size_t discretize_bins = 0;  // equal-frequency bins; 0 disables
  std::optional<std::size_t> max_rows;  // stratified cap applied after down-sampling
  std::size_t min_class_rows = 10;
  std::uint64_t seed = 42;
};

struct Scaler
{
  std::vector<double> mean;
  std::vector<double> sd;
};

struct Prepared
{
  std::vector<std::string> names;
  Eigen::MatrixXd train_x;
  Eigen::VectorXi train_y;
  Eigen::MatrixXd valid_x;
  Eigen::VectorXi valid_y;
  Scaler scaler;
  std::size_t rows_after_downsample = 0;
};

/// Clips every column with more than two distinct values to its
/// nearest-rank [low, high] percentiles.
inline void winsorize(features::FeatureTable & t, double low, double high)
{
  for (std::size_t c = 0; c < t.names.size(); ++c) {
    std::vector<double> col;
    col.reserve(t.size());
    for (const auto & r : t.rows) col.push_back(r[c]);
    std::sort(col.begin(), col.end());
    if (col.empty()) continue;
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < col.size() && distinct <= 2; ++i) {
      if (col[i] != col[i - 1]) ++distinct;
    }
    if (distinct <= 2) continue;
    const double lo = stats::nearest_rank_sorted(col, low);
    const double hi = stats::nearest_rank_sorted(col, high);
    for (auto & r : t.rows) r[c] = std::clamp(r[c], lo, hi);
  }
}

/// Replaces each column with more than \p bins distinct values by its
/// equal-frequency bin index.
inline void discretize(features::FeatureTable & t, std::size_t bins)
{
  if (bins < 2) return;
  for (std::size_t c = 0; c < t.names.size(); ++c) {
    std::vector<double> col;
    for (const auto & r : t.rows) col.push_back(r[c]);
    std::sort(col.begin(), col.end());
    if (std::set<double>(col.begin(), col.end()).size() <= bins) continue;
    std::vector<double> edges;
    for (std::size_t b = 1; b < bins; ++b) {
      edges.push_back(stats::nearest_rank_sorted(col, 100.0 * static_cast<double>(b) / static_cast<double>(bins)));
    }
    for (auto & r : t.rows) {
      r[c] = static_cast<double>(std::upper_bound(edges.begin(), edges.end(), r[c]) - edges.begin());
    }
  }
}

inline std::map<int, std::vector<std::size_t>> rows_by_class(const std::vector<int> & labels)
{
  std::map<int, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < labels.size(); ++i) by[labels[i]].push_back(i);
  return by;
}

/// Randomly keeps \p keep of \p idx (seeded), returned in ascending order.
inline std::vector<std::size_t> sample_rows(std::vector<std::size_t> idx, std::size_t keep, Rng & rng)
{
  rng.shuffle(idx);
  idx.resize(std::min(keep, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Outlier clipping, optional discretization, majority down-sampling,
/// stratified train/validation split, and z-scoring with training
/// statistics.
inline Prepared preprocess(features::FeatureTable t, const PreprocessSpec & spec)
{
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw UsageError(kModule, "train fraction must be in (0, 1)");
  }
  if (spec.downsample_ratio < 0.0) throw UsageError(kModule, "down-sample ratio must be >= 0");
  auto by = rows_by_class(t.labels);
  if (by.size() < 2) throw DataError(kModule, "need at least two classes");
  for (const auto & [lab, idx] : by) {
    if (idx.size() < spec.min_class_rows) {
      throw DataError(kModule, "class " + std::to_string(lab) + " has only " +
                                 std::to_string(idx.size()) + " rows (need " +
                                 std::to_string(spec.min_class_rows) + ")");
    }
  }
  winsorize(t, spec.winsor_low, spec.winsor_high);
  discretize(t, spec.discretize_bins);

  Rng rng(spec.seed);
  if (spec.downsample_ratio > 0.0 && by.size() == 2 && by.count(0) && by.count(1)) {
    const auto limit = static_cast<std::size_t>(
      std::floor(spec.downsample_ratio * static_cast<double>(by[1].size())));
    if (by[0].size() > limit) by[0] = sample_rows(by[0], limit, rng);
  }
  std::size_t total = 0;
  for (const auto & [lab, idx] : by) total += idx.size();
  if (spec.max_rows && total > *spec.max_rows) {
    // Largest-remainder apportionment: class shares are kept and the total
    // is exactly max_rows.
    const double f = static_cast<double>(*spec.max_rows) / static_cast<double>(total);
    std::vector<std::pair<double, int>> remainders;
    std::map<int, std::size_t> keep;
    std::size_t assigned = 0;
    for (const auto & [lab, idx] : by) {
      const double exact = f * static_cast<double>(idx.size());
      keep[lab] = static_cast<std::size_t>(std::floor(exact));
      assigned += keep[lab];
      remainders.push_back({exact - std::floor(exact), lab});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto & a, const auto & b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < *spec.max_rows && k < remainders.size(); ++k, ++assigned) {
      ++keep[remainders[k].second];
    }
    for (auto & [lab, idx] : by) idx = sample_rows(idx, keep[lab], rng);
  }

  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::size_t kept = 0;
  for (auto & [lab, idx] : by) {
    kept += idx.size();
    auto shuffled = idx;
    rng.shuffle(shuffled);
    const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    train.insert(train.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    valid.insert(valid.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());

  Prepared out;
  out.names = t.names;
  out.rows_after_downsample = kept;
  const auto p = static_cast<Eigen::Index>(t.names.size());
  auto fill = [&](const std::vector<std::size_t> & idx, Eigen::MatrixXd & X, Eigen::VectorXi & y) {
    X.resize(static_cast<Eigen::Index>(idx.size()), p);
    y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (Eigen::Index c = 0; c < p; ++c) {
        X(static_cast<Eigen::Index>(r), c) = t.rows[idx[r]][static_cast<std::size_t>(c)];
      }
      y[static_cast<Eigen::Index>(r)] = t.labels[idx[r]];
    }
  };
  fill(train, out.train_x, out.train_y);
  fill(valid, out.valid_x, out.valid_y);

  out.scaler.mean.resize(static_cast<std::size_t>(p));
  out.scaler.sd.resize(static_cast<std::size_t>(p));
  for (Eigen::Index c = 0; c < p; ++c) {
    const double m = out.train_x.col(c).mean();
    const double var = (out.train_x.col(c).array() - m).square().mean();
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    out.scaler.mean[static_cast<std::size_t>(c)] = m;
    out.scaler.sd[static_cast<std::size_t>(c)] = sd;
    out.train_x.col(c) = (out.train_x.col(c).array() - m) / sd;
    out.valid_x.col(c) = (out.valid_x.col(c).array() - m) / sd;
  }
  return out;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__PREPROCESS_HPP_
