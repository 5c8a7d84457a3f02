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

#include "groupwise/risk.hpp"
#include "grouping_fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

using namespace groupwise;
using risk::PropagationPattern;

namespace
{

std::vector<ssm::TtcResult> ttcs(std::initializer_list<double> vs)
{
  std::vector<ssm::TtcResult> out;
  for (double v : vs) out.push_back({v, ssm::TtcKind::in_lane, false});
  return out;
}

PropagationPattern pattern_of(std::vector<std::size_t> q, bool strict = false)
{
  return risk::classify_pattern(q, strict);
}

/// Reference labelling from the step differences alone.
PropagationPattern pattern_oracle(const std::vector<std::size_t> & q)
{
  bool any_up = false, any_down = false;
  for (std::size_t i = 1; i < q.size(); ++i) {
    any_up |= q[i] > q[i - 1];
    any_down |= q[i] < q[i - 1];
  }
  if (!any_up && !any_down) return PropagationPattern::maintaining;
  if (any_up && !any_down) return PropagationPattern::diffusion;
  if (any_down && !any_up) return PropagationPattern::dissipation;
  return PropagationPattern::fluctuation;
}

/// Single-lane frame of n vehicles, 10 m bumper gaps, each follower 2 m/s
/// faster than its leader: every pair has TTC 5 s.
Frame uniform_frame(double t, int n)
{
  std::vector<VehicleState> vs;
  for (int i = 0; i < n; ++i) {
    vs.push_back(oracle::vehicle("v" + std::to_string(100 + i), 1, 900.0 - 14.5 * i, 10.0 + 2.0 * i));
  }
  return fixtures::frame(t, vs);
}

}  // namespace

TEST(GroupRisk, WorkedExample)
{
  const auto r = risk::group_risk(ttcs({1.2, 1.4, 2.0}), 1.5);
  EXPECT_NEAR(r.risk, 1.0 / 1.2, 1e-12);
  EXPECT_TRUE(r.is_high);
  EXPECT_EQ(r.qty_high_risk, 2u);
}

TEST(GroupRisk, NoFinitePairsAndClampedPair)
{
  const auto none = risk::group_risk(ttcs({}), 1.5);
  EXPECT_EQ(none.risk, 0.0);
  EXPECT_FALSE(none.is_high);
  EXPECT_EQ(none.qty_high_risk, 0u);
  const auto clamped = risk::group_risk(std::vector<ssm::TtcResult>{{1.25, ssm::TtcKind::lane_change_projection, true}});
  EXPECT_DOUBLE_EQ(clamped.risk, 0.8);
  EXPECT_TRUE(clamped.is_high);
  EXPECT_EQ(clamped.qty_high_risk, 1u);
}

TEST(GroupRisk, BoundaryIsNotHigh)
{
  const auto r = risk::group_risk(ttcs({1.5, 3.0}), 1.5);
  EXPECT_FALSE(r.is_high);
  EXPECT_EQ(r.qty_high_risk, 0u);
}

TEST(GroupRisk, PropertiesOnRandomPairSets)
{
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ssm::TtcResult> ps;
    const auto n = rng.index(8);
    for (std::size_t i = 0; i < n; ++i) ps.push_back({rng.uniform(0.05, 6.0), ssm::TtcKind::in_lane, false});
    const double thr = rng.uniform(0.5, 3.0);
    const auto r = risk::group_risk(ps, thr);
    double mn = oracle::kInf;
    std::size_t q = 0;
    for (const auto & p : ps) {
      mn = std::min(mn, p.value);
      q += p.value < thr ? 1 : 0;
    }
    EXPECT_EQ(r.qty_high_risk, q);
    EXPECT_LE(r.qty_high_risk, ps.size());
    EXPECT_EQ(r.is_high, q > 0);
    EXPECT_DOUBLE_EQ(r.risk, ps.empty() ? 0.0 : 1.0 / mn);
  }
}

TEST(Pattern, CanonicalSequences)
{
  EXPECT_EQ(pattern_of({3, 2, 1}), PropagationPattern::dissipation);
  EXPECT_EQ(pattern_of({2, 2, 2}), PropagationPattern::maintaining);
  EXPECT_EQ(pattern_of({1, 2, 3}), PropagationPattern::diffusion);
  EXPECT_EQ(pattern_of({1, 3, 2}), PropagationPattern::fluctuation);
  EXPECT_EQ(risk::kPatternNames[0], "dissipation");
  EXPECT_EQ(risk::kPatternNames[3], "fluctuation");
}

TEST(Pattern, ExhaustiveAgainstReference)
{
  // Every series of length 2..4 over the values 0..3.
  std::size_t checked = 0;
  for (std::size_t len = 2; len <= 4; ++len) {
    std::vector<std::size_t> q(len, 0);
    while (true) {
      ASSERT_EQ(pattern_of(q), pattern_oracle(q));
      ++checked;
      std::size_t i = 0;
      while (i < len && ++q[i] == 4) q[i++] = 0;
      if (i == len) break;
    }
  }
  EXPECT_EQ(checked, 16u + 64u + 256u);
}

TEST(Pattern, StrictModeNeedsEveryStepToMove)
{
  EXPECT_EQ(pattern_of({1, 1, 2}), PropagationPattern::diffusion);
  EXPECT_EQ(pattern_of({1, 1, 2}, true), PropagationPattern::fluctuation);
  EXPECT_EQ(pattern_of({3, 2, 2}, true), PropagationPattern::fluctuation);
  EXPECT_EQ(pattern_of({3, 2, 1}, true), PropagationPattern::dissipation);
  EXPECT_EQ(pattern_of({2, 2}, true), PropagationPattern::maintaining);
  EXPECT_THROW(pattern_of({1}), DataError);
}

TEST(Pattern, DistributionCountsEveryTrajectory)
{
  Rng rng(9);
  std::vector<PropagationPattern> ps;
  for (int i = 0; i < 500; ++i) {
    std::vector<std::size_t> q(2 + rng.index(5));
    for (auto & v : q) v = rng.index(4);
    ps.push_back(pattern_of(q));
  }
  const auto d = risk::pattern_distribution(ps);
  EXPECT_EQ(std::accumulate(d.begin(), d.end(), std::size_t{0}), ps.size());
}

TEST(Pattern, QuantitySeriesFollowsTrajectory)
{
  std::vector<Frame> frames;
  // A pair that closes faster each second: TTC 2.0 then 1.0.
  using oracle::vehicle;
  frames.push_back(fixtures::frame(0, {vehicle("a", 1, 100, 20), vehicle("b", 1, 87.5, 24), vehicle("c", 1, 75, 30)}));
  frames.push_back(fixtures::frame(1, {vehicle("a", 1, 120, 20), vehicle("b", 1, 107.5, 28), vehicle("c", 1, 100, 30)}));
  Dataset ds;
  ds.frames = frames;
  const auto gd = grouping::build_trajectories(ds, grouping::static_thresholds());
  ASSERT_EQ(gd.trajectories.size(), 1u);
  const auto risks = risk::all_risks(gd);
  const auto q = risk::quantity_series(gd.trajectories[0], risks);
  // Frame 0: a-b 8/4 = 2.0, b-c 8/6 = 1.33 -> 1 pair; frame 1: 8/8 = 1.0, 3/2 = 1.5 -> 1 pair.
  EXPECT_EQ(q, (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(risk::classify_all(gd, risks)[0], PropagationPattern::maintaining);
}

TEST(AdaptiveMap, ConstantInverseTtcGivesFlatCurves)
{
  Dataset ds;
  ds.geometry.length = 1000;
  for (int k = 0; k < 40; ++k) ds.frames.push_back(uniform_frame(k, 3 + k % 17));
  const auto m = risk::build_adaptive_thresholds(ds);
  ASSERT_EQ(m.centers.size(), risk::AdaptiveThresholdMap::kBins);
  for (std::size_t b = 0; b < m.centers.size(); ++b) {
    EXPECT_NEAR(m.p97[b], 0.2, 1e-12);
    EXPECT_NEAR(m.p90[b], 0.2, 1e-12);
  }
  for (double d : {0.0, 0.005, 0.012, 0.019, 1.0}) {
    EXPECT_NEAR(m.eval97(d), 0.2, 1e-12);
    const auto th = risk::adaptive_grouping_thresholds(m, d);
    EXPECT_NEAR(th.ttc_in, 5.0, 1e-9);
    EXPECT_NEAR(th.ttc_cross, 5.0, 1e-9);
    EXPECT_EQ(th.high_risk_ttc, th.ttc_in);
  }
}

TEST(AdaptiveMap, BinPercentilesMatchOracle)
{
  Rng rng(21);
  Dataset ds;
  ds.geometry.length = 600;
  for (int k = 0; k < 300; ++k) ds.frames.push_back(oracle::random_frame(rng, 30, 3, 400));
  const auto m = risk::build_adaptive_thresholds(ds);
  std::vector<std::vector<double>> pools(risk::AdaptiveThresholdMap::kBins);
  const double w = (m.density_max - m.density_min) / 100.0;
  for (const auto & f : ds.frames) {
    const double d = static_cast<double>(f.states.size()) / 600.0;
    auto b = std::min<std::size_t>(99, static_cast<std::size_t>((d - m.density_min) / w));
    // Pairs by brute force: nearest vehicle ahead in the same lane.
    for (const auto & u : f.states) {
      const VehicleState * lead = nullptr;
      for (const auto & o : f.states) {
        if (o.lane_id != u.lane_id || &o == &u) continue;
        const bool ahead = o.x > u.x || (o.x == u.x && o.vehicle_id < u.vehicle_id);
        if (ahead && (!lead || o.x < lead->x || (o.x == lead->x && o.vehicle_id > lead->vehicle_id))) lead = &o;
      }
      if (!lead) continue;
      const double ttc = oracle::simulate_constant(lead->x - lead->length - u.x, lead->v, u.v);
      pools[b].push_back(std::isinf(ttc) ? 0.0 : 1.0 / ttc);
    }
  }
  std::size_t non_empty = 0;
  for (std::size_t b = 0; b < 100; ++b) {
    ASSERT_EQ(m.counts[b], pools[b].size()) << b;
    if (pools[b].empty()) continue;
    ++non_empty;
    // 1 ms stepping oracle: relative agreement well inside 1e-6.
    const double o97 = oracle::percentile_sorted(pools[b], 97);
    const double o90 = oracle::percentile_sorted(pools[b], 90);
    EXPECT_NEAR(m.p97[b], o97, 1e-6 * std::max(1.0, o97)) << b;
    EXPECT_NEAR(m.p90[b], o90, 1e-6 * std::max(1.0, o90)) << b;
  }
  EXPECT_GE(non_empty, 2u);
  for (double d = m.density_min - 0.01; d < m.density_max + 0.01; d += 1e-4) {
    EXPECT_GE(m.eval97(d), m.eval90(d) - 1e-15);
  }
}

TEST(AdaptiveMap, PiecewiseLinearWithFlatExtrapolation)
{
  const std::vector<double> xs = {1, 2, 4}, ys = {10, 20, 0};
  EXPECT_EQ(risk::AdaptiveThresholdMap::interpolate(xs, ys, 0.0), 10);
  EXPECT_EQ(risk::AdaptiveThresholdMap::interpolate(xs, ys, 9.0), 0);
  EXPECT_DOUBLE_EQ(risk::AdaptiveThresholdMap::interpolate(xs, ys, 1.5), 15);
  EXPECT_DOUBLE_EQ(risk::AdaptiveThresholdMap::interpolate(xs, ys, 3.0), 10);
  EXPECT_DOUBLE_EQ(risk::AdaptiveThresholdMap::interpolate(xs, ys, 2.0), 20);
}

TEST(AdaptiveMap, EmptyBinsInterpolateBetweenNeighbours)
{
  std::vector<double> v = {0, 5, 0, 0, 11, 0};
  risk::fill_empty_bins(v, {false, true, false, false, true, false});
  EXPECT_EQ(v, (std::vector<double>{5, 5, 7, 9, 11, 11}));
}

TEST(AdaptiveMap, RejectsConstantDensity)
{
  Dataset ds;
  for (int k = 0; k < 5; ++k) ds.frames.push_back(uniform_frame(k, 4));
  EXPECT_THROW(risk::build_adaptive_thresholds(ds), DataError);
  EXPECT_THROW(risk::build_adaptive_thresholds(Dataset{}), DataError);
}

TEST(AdaptiveMap, WrittenCurveHasOneRowPerBin)
{
  Dataset ds;
  ds.geometry.length = 1000;
  for (int k = 0; k < 20; ++k) ds.frames.push_back(uniform_frame(k, 3 + k));
  std::ostringstream out;
  risk::write_threshold_map(out, risk::build_adaptive_thresholds(ds));
  std::istringstream in(out.str());
  const auto t = csv::read_table(in, "t");
  EXPECT_EQ(t.header, (std::vector<std::string>{"density_veh_per_m", "inv_ttc_p97", "inv_ttc_p90"}));
  EXPECT_EQ(t.rows.size(), 100u);
}

TEST(PairPercentile, NearestRankOverAllPairs)
{
  // ttc 5 s everywhere plus one frame with a 1 s pair.
  Dataset ds;
  for (int k = 0; k < 10; ++k) ds.frames.push_back(uniform_frame(k, 11));
  EXPECT_NEAR(risk::pair_ttc_percentile(ds, 50), 5.0, 1e-12);
  Dataset none;
  none.frames.push_back(fixtures::frame(0, {oracle::vehicle("a", 1, 100, 20)}));
  EXPECT_THROW(risk::pair_ttc_percentile(none, 50), DataError);
}

TEST(SizeSummary, PopulationMoments)
{
  grouping::GroupedDataset gd;
  gd.groups.resize(2);
  auto grp = [](std::size_t n) {
    grouping::VehicleGroup g;
    g.members.resize(n);
    return g;
  };
  gd.groups[0] = {grp(1), grp(2)};
  gd.groups[1] = {grp(3)};
  const auto s = risk::size_summary(gd);
  EXPECT_EQ(s.groups, 3u);
  EXPECT_EQ(s.max, 3u);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_NEAR(s.std, std::sqrt(2.0 / 3.0), 1e-12);
}
