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

#ifndef GROUPWISE__RISK_HPP_
#define GROUPWISE__RISK_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/grouping.hpp"
#include "groupwise/ssm.hpp"
#include "groupwise/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace groupwise::risk
{

inline constexpr const char * kModule = "risk-metrics";

struct GroupRisk
{
  double risk = 0.0;  // 1/s
  std::size_t qty_high_risk = 0;
  bool is_high = false;
};

/// Inverse of the smallest pair TTC (0 without finite pairs). High risk when
/// the inverse exceeds 1/high_risk_ttc; the quantity counts pairs below
/// high_risk_ttc.
inline GroupRisk group_risk(std::span<const ssm::TtcResult> pair_ttcs, double high_risk_ttc = 1.5)
{
  GroupRisk r;
  double min_ttc = ssm::kInf;
  for (const auto & p : pair_ttcs) {
    if (!p.finite()) continue;
    min_ttc = std::min(min_ttc, p.value);
    if (p.value < high_risk_ttc) ++r.qty_high_risk;
  }
  if (std::isfinite(min_ttc)) r.risk = 1.0 / min_ttc;
  r.is_high = r.risk > 1.0 / high_risk_ttc;
  return r;
}

inline GroupRisk group_risk(const grouping::VehicleGroup & g, double high_risk_ttc = 1.5)
{
  return group_risk(g.pair_ttcs, high_risk_ttc);
}

enum class PropagationPattern { dissipation = 0, maintaining = 1, diffusion = 2, fluctuation = 3 };

inline constexpr std::array<std::string_view, 4> kPatternNames = {
  "dissipation", "maintaining", "diffusion", "fluctuation"};

inline std::string_view to_string(PropagationPattern p) { return kPatternNames[static_cast<int>(p)]; }

/// Labels a high-risk quantity series. Default reading: constant is
/// maintaining, non-decreasing with a net rise is diffusion, non-increasing
/// with a net fall is dissipation, anything else fluctuates. \p strict
/// requires every step to move in the same direction.
inline PropagationPattern classify_pattern(std::span<const std::size_t> q, bool strict = false)
{
  if (q.size() < 2) {
    throw DataError(kModule, "pattern needs at least two timestamps");
  }
  bool up = true;
  bool down = true;
  bool flat = true;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] != q[i - 1]) flat = false;
    if (strict ? !(q[i] > q[i - 1]) : q[i] < q[i - 1]) up = false;
    if (strict ? !(q[i] < q[i - 1]) : q[i] > q[i - 1]) down = false;
  }
  if (flat) return PropagationPattern::maintaining;
  if (up && q.back() > q.front()) return PropagationPattern::diffusion;
  if (down && q.back() < q.front()) return PropagationPattern::dissipation;
  return PropagationPattern::fluctuation;
}

/// Per-group risk for every group of a grouped dataset, using each frame's
/// high-risk threshold.
inline std::vector<std::vector<GroupRisk>> all_risks(const grouping::GroupedDataset & gd)
{
  std::vector<std::vector<GroupRisk>> out(gd.groups.size());
  for (std::size_t f = 0; f < gd.groups.size(); ++f) {
    for (const auto & g : gd.groups[f]) {
      out[f].push_back(group_risk(g, gd.thresholds[f].high_risk_ttc));
    }
  }
  return out;
}

inline std::vector<std::size_t> quantity_series(
  const grouping::GroupTrajectory & tr, const std::vector<std::vector<GroupRisk>> & risks)
{
  std::vector<std::size_t> q;
  for (const auto & [f, g] : tr.steps) q.push_back(risks[f][g].qty_high_risk);
  return q;
}

inline std::vector<PropagationPattern> classify_all(
  const grouping::GroupedDataset & gd, const std::vector<std::vector<GroupRisk>> & risks,
  bool strict = false)
{
  std::vector<PropagationPattern> out;
  for (const auto & tr : gd.trajectories) {
    const auto q = quantity_series(tr, risks);
    out.push_back(classify_pattern(q, strict));
  }
  return out;
}

inline std::array<std::size_t, 4> pattern_distribution(std::span<const PropagationPattern> ps)
{
  std::array<std::size_t, 4> n{};
  for (auto p : ps) ++n[static_cast<int>(p)];
  return n;
}

/// Density-conditioned inverse-TTC percentile curves.
struct AdaptiveThresholdMap
{
  static constexpr std::size_t kBins = 100;

  double density_min = 0.0;
  double density_max = 0.0;
  std::vector<double> centers;  // veh/m
  std::vector<double> p97;      // 1/s
  std::vector<double> p90;      // 1/s
  std::vector<std::size_t> counts;

  double bin_width() const
  {
    return (density_max - density_min) / static_cast<double>(kBins);
  }

  static double interpolate(
    const std::vector<double> & xs, const std::vector<double> & ys, double x)
  {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto hi = static_cast<std::size_t>(it - xs.begin());
    const auto lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + w * (ys[hi] - ys[lo]);
  }

  double eval97(double density) const { return interpolate(centers, p97, density); }
  double eval90(double density) const { return interpolate(centers, p90, density); }
};

/// Inverse standard TTC (0 for +inf) of every immediate leader-follower pair
/// in every lane of \p frame.
inline std::vector<double> frame_inverse_ttcs(const Frame & frame)
{
  std::vector<double> out;
  for (int lane : grouping::occupied_lanes(frame)) {
    const auto order = grouping::lane_order(frame, lane);
    for (std::size_t k = 1; k < order.size(); ++k) {
      const auto r = ssm::ttc(frame.states[order[k - 1]], frame.states[order[k]]);
      out.push_back(r.finite() ? 1.0 / r.value : 0.0);
    }
  }
  return out;
}

inline double frame_density(const Frame & frame, const RoadGeometry & g)
{
  return static_cast<double>(frame.states.size()) / g.length;
}

/// Fills empty bins by linear interpolation between the nearest non-empty
/// neighbours, and edge runs by the nearest non-empty value.
inline void fill_empty_bins(std::vector<double> & v, const std::vector<bool> & filled)
{
  const std::size_t n = v.size();
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < n; ++i) {
    if (!filled[i]) continue;
    if (!prev) {
      for (std::size_t j = 0; j < i; ++j) v[j] = v[i];
    } else {
      for (std::size_t j = *prev + 1; j < i; ++j) {
        const double w = static_cast<double>(j - *prev) / static_cast<double>(i - *prev);
        v[j] = v[*prev] + w * (v[i] - v[*prev]);
      }
    }
    prev = i;
  }
  if (prev) {
    for (std::size_t j = *prev + 1; j < n; ++j) v[j] = v[*prev];
  }
}

/// Pools per-pair inverse TTCs by frame density into 100 equal-width bins
/// and takes the nearest-rank 97th and 90th percentile per bin.
inline AdaptiveThresholdMap build_adaptive_thresholds(const Dataset & ds)
{
  if (ds.frames.empty()) throw DataError(kModule, "adaptive thresholds need a non-empty dataset");
  constexpr std::size_t B = AdaptiveThresholdMap::kBins;
  std::vector<double> density;
  std::vector<std::vector<double>> inv;
  for (const auto & f : ds.frames) {
    density.push_back(frame_density(f, ds.geometry));
    inv.push_back(frame_inverse_ttcs(f));
  }
  AdaptiveThresholdMap m;
  m.density_min = *std::min_element(density.begin(), density.end());
  m.density_max = *std::max_element(density.begin(), density.end());
  if (!(m.density_max > m.density_min)) {
    throw DataError(kModule, "adaptive thresholds need at least 2 non-empty density bins: "
                             "density is constant");
  }
  const double w = m.bin_width();
  std::vector<std::vector<double>> pools(B);
  for (std::size_t f = 0; f < density.size(); ++f) {
    auto b = static_cast<std::size_t>(std::floor((density[f] - m.density_min) / w));
    b = std::min(b, B - 1);
    pools[b].insert(pools[b].end(), inv[f].begin(), inv[f].end());
  }
  m.centers.resize(B);
  m.p97.assign(B, 0.0);
  m.p90.assign(B, 0.0);
  m.counts.assign(B, 0);
  std::vector<bool> filled(B, false);
  std::size_t non_empty = 0;
  for (std::size_t b = 0; b < B; ++b) {
    m.centers[b] = m.density_min + (static_cast<double>(b) + 0.5) * w;
    auto & pool = pools[b];
    m.counts[b] = pool.size();
    if (pool.empty()) continue;
    std::sort(pool.begin(), pool.end());
    m.p97[b] = stats::nearest_rank_sorted(pool, 97.0);
    m.p90[b] = stats::nearest_rank_sorted(pool, 90.0);
    filled[b] = true;
    ++non_empty;
  }
  if (non_empty < 2) {
    throw DataError(kModule, "adaptive thresholds need at least 2 non-empty density bins");
  }
  fill_empty_bins(m.p97, filled);
  fill_empty_bins(m.p90, filled);
  return m;
}

/// Grouping thresholds at \p density: the 97th-percentile curve drives
/// in-lane linking and the high-risk cut, the 90th drives cross-lane
/// merging. A zero curve value disables the corresponding rule.
inline grouping::FrameThresholds adaptive_grouping_thresholds(
  const AdaptiveThresholdMap & m, double density)
{
  auto inverse = [](double v) { return v > 0.0 ? 1.0 / v : ssm::kInf; };
  grouping::FrameThresholds th;
  th.ttc_in = inverse(m.eval97(density));
  th.ttc_cross = inverse(m.eval90(density));
  th.high_risk_ttc = th.ttc_in;
  return th;
}

inline grouping::ThresholdFn adaptive_threshold_fn(AdaptiveThresholdMap m, RoadGeometry g)
{
  return [m = std::move(m), g = std::move(g)](const Frame & f) {
    return adaptive_grouping_thresholds(m, frame_density(f, g));
  };
}

/// `density_veh_per_m,inv_ttc_p97,inv_ttc_p90` at bin centers.
inline void write_threshold_map(std::ostream & out, const AdaptiveThresholdMap & m)
{
  out << "density_veh_per_m,inv_ttc_p97,inv_ttc_p90\n";
  for (std::size_t b = 0; b < m.centers.size(); ++b) {
    out << csv::fmt(m.centers[b]) << ',' << csv::fmt(m.p97[b]) << ',' << csv::fmt(m.p90[b]) << '\n';
  }
}

/// Per-pair TTC percentile across a dataset (finite in-lane pairs), used to
/// recompute the projection clamp value.
inline double pair_ttc_percentile(const Dataset & ds, double pct)
{
  std::vector<double> all;
  for (const auto & f : ds.frames) {
    for (int lane : grouping::occupied_lanes(f)) {
      const auto order = grouping::lane_order(f, lane);
      for (std::size_t k = 1; k < order.size(); ++k) {
        const auto r = ssm::ttc(f.states[order[k - 1]], f.states[order[k]]);
        if (r.finite()) all.push_back(r.value);
      }
    }
  }
  if (all.empty()) throw DataError(kModule, "no finite TTC pairs to take a percentile of");
  return stats::nearest_rank(std::move(all), pct);
}

struct SizeSummary
{
  std::size_t groups = 0;
  std::size_t max = 0;
  double std = 0.0;
  double mean = 0.0;
};

inline SizeSummary size_summary(const grouping::GroupedDataset & gd)
{
  std::vector<double> sizes;
  for (const auto & fg : gd.groups) {
    for (const auto & g : fg) sizes.push_back(static_cast<double>(g.size()));
  }
  SizeSummary s;
  s.groups = sizes.size();
  if (!sizes.empty()) {
    s.max = static_cast<std::size_t>(*std::max_element(sizes.begin(), sizes.end()));
    s.std = stats::pop_std(sizes);
    s.mean = stats::mean(sizes);
  }
  return s;
}

}  // namespace groupwise::risk

#endif  // GROUPWISE__RISK_HPP_
