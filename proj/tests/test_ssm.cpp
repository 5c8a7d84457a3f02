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

#include "groupwise/ssm.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace groupwise;
using oracle::vehicle;

namespace
{

struct Pair
{
  VehicleState leader, follower;
};

/// Random same-lane pair with a positive gap; a third of followers are slower.
Pair random_pair(Rng & rng)
{
  const double len = rng.uniform(3.5, 12.0);
  const double gap = rng.uniform(0.2, 60.0);
  const double vl = rng.bernoulli(0.2) ? rng.uniform(0.0, 3.0) : rng.uniform(0.0, 35.0);
  double vf;
  if (rng.bernoulli(1.0 / 3.0)) {
    vf = rng.uniform(0.0, vl);
  } else {
    vf = vl + rng.uniform(1.0, 10.0);
  }
  const double xf = rng.uniform(-500.0, 500.0);
  return {vehicle("L", 2, xf + gap + len, vl, len), vehicle("F", 2, xf, vf, 4.5)};
}

}  // namespace

TEST(Ttc, WorkedExample)
{
  const auto r = ssm::ttc(vehicle("L", 1, 50, 20, 4), vehicle("F", 1, 20, 25));
  EXPECT_DOUBLE_EQ(r.value, 5.2);
  EXPECT_EQ(r.kind, ssm::TtcKind::in_lane);
  EXPECT_FALSE(r.clamped);
}

TEST(Ttc, NotFasterFollowerNeverCollides)
{
  EXPECT_TRUE(std::isinf(ssm::ttc(vehicle("L", 1, 50, 20), vehicle("F", 1, 20, 20)).value));
  EXPECT_TRUE(std::isinf(ssm::ttc(vehicle("L", 1, 50, 20), vehicle("F", 1, 20, 19.999)).value));
  EXPECT_FALSE(ssm::ttc(vehicle("L", 1, 50, 20), vehicle("F", 1, 20, 20)).finite());
}

TEST(Ttc, OverlapAndLaneMismatchAreDataErrors)
{
  EXPECT_THROW(ssm::ttc(vehicle("L", 1, 24, 20), vehicle("F", 1, 20, 25)), OverlapError);
  EXPECT_THROW(ssm::ttc(vehicle("L", 1, 50, 20), vehicle("F", 2, 20, 25)), DataError);
  EXPECT_THROW(ssm::adverse_ttc(vehicle("L", 1, 24.5, 20), vehicle("F", 1, 20, 25)), OverlapError);
}

TEST(Ttc, TranslationAndScaleInvariance)
{
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    auto p = random_pair(rng);
    const double base = ssm::ttc(p.leader, p.follower).value;
    auto shifted = p;
    const double dx = rng.uniform(-1e3, 1e3);
    shifted.leader.x += dx;
    shifted.follower.x += dx;
    const double moved = ssm::ttc(shifted.leader, shifted.follower).value;
    // Scale speeds and gap by c: leader.x - follower.x - length is scaled.
    const double c = rng.uniform(0.2, 5.0);
    auto scaled = p;
    const double gap = ssm::gap(p.leader, p.follower);
    scaled.leader.v *= c;
    scaled.follower.v *= c;
    scaled.leader.x = scaled.follower.x + c * gap + scaled.leader.length;
    const double sc = ssm::ttc(scaled.leader, scaled.follower).value;
    if (std::isinf(base)) {
      EXPECT_TRUE(std::isinf(moved));
      EXPECT_TRUE(std::isinf(sc));
    } else {
      EXPECT_NEAR(moved, base, 1e-9 * std::max(1.0, base));
      EXPECT_NEAR(sc, base, 1e-9 * std::max(1.0, base));
    }
  }
}

TEST(AdverseTtc, WorkedExample)
{
  const auto r = ssm::adverse_ttc(vehicle("L", 1, 50, 20, 4), vehicle("F", 1, 20, 25));
  EXPECT_DOUBLE_EQ(r.value, 2.4375);
  EXPECT_EQ(r.kind, ssm::TtcKind::adverse);
}

TEST(AdverseTtc, LeaderStopsInsideTheWindow)
{
  // v = 2 at 3 m/s^2 stops after 2/3 s having moved 2/3 m; then stands still.
  const auto r = ssm::adverse_ttc(vehicle("L", 1, 50, 2, 4), vehicle("F", 1, 20, 5));
  const double gap = 50.0 + 2.0 / 3.0 - 4.0 - 25.0;
  EXPECT_NEAR(r.value, gap / 5.0, 1e-12);
}

TEST(AdverseTtc, SlowerFollowerAfterBrakingIsInfinite)
{
  // Leader 20 -> 17 after braking; follower at 16 is still slower.
  EXPECT_TRUE(std::isinf(ssm::adverse_ttc(vehicle("L", 1, 100, 20), vehicle("F", 1, 20, 16)).value));
}

TEST(AdverseTtc, ContactInsideTheBrakingWindowReturnsContactTime)
{
  // Gap 1 m, closing at 5 m/s plus braking: contact well inside 1 s.
  const auto lead = vehicle("L", 1, 25.5, 20);
  const auto foll = vehicle("F", 1, 20, 25);
  const auto r = ssm::adverse_ttc(lead, foll);
  // 1 - 5 tau - 1.5 tau^2 = 0
  const double expected = (-5.0 + std::sqrt(25.0 + 6.0)) / 3.0;
  EXPECT_NEAR(r.value, expected, 1e-12);
  EXPECT_LT(r.value, 1.0);
  EXPECT_GT(r.value, 0.0);
}

TEST(AdverseTtc, VanishingDecelerationEqualsConstantSpeedAdvance)
{
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    auto p = random_pair(rng);
    const double t = rng.uniform(0.1, 3.0);
    const auto r = ssm::adverse_ttc(p.leader, p.follower, {1e-9, t});
    auto l = p.leader;
    auto f = p.follower;
    l.x += l.v * t;
    f.x += f.v * t;
    const double g = ssm::gap(l, f);
    if (g <= 0.0) {
      // Constant-speed contact inside the window.
      EXPECT_NEAR(r.value, ssm::gap(p.leader, p.follower) / (f.v - l.v), 1e-6);
    } else {
      const double expected = ssm::ttc(l, f).value;
      if (std::isinf(expected)) {
        EXPECT_TRUE(std::isinf(r.value));
      } else {
        EXPECT_NEAR(r.value, expected, 1e-6);
      }
    }
  }
}

TEST(AdverseTtc, MatchesMillisecondForwardSimulation)
{
  Rng rng(77);
  for (int i = 0; i < 3000; ++i) {
    auto p = random_pair(rng);
    const ssm::AdverseParams params{rng.uniform(0.5, 6.0), rng.uniform(0.2, 3.0)};
    const double got = ssm::adverse_ttc(p.leader, p.follower, params).value;
    const double want = oracle::simulate_adverse(p.leader, p.follower, params.decel, params.duration);
    if (std::isinf(want)) {
      EXPECT_TRUE(std::isinf(got)) << i;
    } else {
      EXPECT_NEAR(got, want, 1e-6) << i;
    }
    EXPECT_GT(got, 0.0);
  }
}

TEST(AdverseTtc, ParamsAreValidated)
{
  EXPECT_THROW((ssm::AdverseParams{0.0, 1.0}.validate()), UsageError);
  EXPECT_THROW((ssm::AdverseParams{3.0, -1.0}.validate()), UsageError);
}

TEST(ProjectedTtc, WorkedExample)
{
  const auto r = ssm::projected_ttc(vehicle("A", 2, 30, 15, 5), vehicle("B", 3, 10, 22));
  ASSERT_TRUE(r);
  EXPECT_NEAR(r->value, 15.0 / 7.0, 1e-12);
  EXPECT_NEAR(r->value, 2.143, 5e-4);
  EXPECT_EQ(r->kind, ssm::TtcKind::projected_adjacent);
  // Argument order does not matter: the larger x leads.
  EXPECT_DOUBLE_EQ(ssm::projected_ttc(vehicle("B", 3, 10, 22), vehicle("A", 2, 30, 15, 5))->value, r->value);
}

TEST(ProjectedTtc, OverlapEqualSpeedsAndNonAdjacentLanes)
{
  EXPECT_FALSE(ssm::projected_ttc(vehicle("A", 1, 30, 15), vehicle("B", 2, 30, 22)));
  EXPECT_TRUE(std::isinf(ssm::projected_ttc(vehicle("A", 1, 60, 15), vehicle("B", 2, 30, 15))->value));
  EXPECT_THROW(ssm::projected_ttc(vehicle("A", 1, 60, 15), vehicle("B", 3, 30, 15)), DataError);
  EXPECT_THROW(ssm::projected_ttc(vehicle("A", 2, 60, 15), vehicle("B", 2, 30, 15)), DataError);
}

TEST(ProjectedTtc, MatchesMillisecondForwardSimulation)
{
  Rng rng(78);
  for (int i = 0; i < 3000; ++i) {
    auto p = random_pair(rng);
    p.follower.lane_id = 3;
    const auto got = ssm::projected_ttc(p.leader, p.follower);
    ASSERT_TRUE(got);
    const double want = oracle::simulate_constant(p.leader.x - p.follower.x - p.leader.length,
                                                  p.leader.v, p.follower.v);
    if (std::isinf(want)) {
      EXPECT_TRUE(std::isinf(got->value));
    } else {
      EXPECT_NEAR(got->value, want, 1e-6);
    }
  }
}

TEST(Ttc, MatchesMillisecondForwardSimulation)
{
  Rng rng(79);
  for (int i = 0; i < 3000; ++i) {
    const auto p = random_pair(rng);
    const double got = ssm::ttc(p.leader, p.follower).value;
    const double want = oracle::simulate_constant(ssm::gap(p.leader, p.follower), p.leader.v, p.follower.v);
    if (std::isinf(want)) {
      EXPECT_TRUE(std::isinf(got));
    } else {
      EXPECT_NEAR(got, want, 1e-6);
      EXPECT_GT(got, 0.0);
    }
  }
}

TEST(LaneChange, TwoPhantomsOneInEachLane)
{
  auto c = vehicle("C", 2, 100, 20);
  c.a = -0.7;
  const auto ph = ssm::lane_change_projections(c, 2, 3);
  EXPECT_EQ(ph[0].lane_id, 2);
  EXPECT_EQ(ph[1].lane_id, 3);
  for (const auto & p : ph) {
    EXPECT_EQ(p.x, c.x);
    EXPECT_EQ(p.v, c.v);
    EXPECT_EQ(p.a, c.a);
    EXPECT_EQ(p.length, c.length);
  }
  EXPECT_THROW(ssm::lane_change_projections(c, 2, 2), DataError);
}

TEST(LaneChange, OverlappingPhantomIsClampedExactly)
{
  const auto r = ssm::projection_ttc(vehicle("L", 3, 102, 20), vehicle("C", 3, 100, 25));
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.value, ssm::kTtcClamp);
  EXPECT_EQ(r.value, 1.25);
  EXPECT_EQ(r.kind, ssm::TtcKind::lane_change_projection);
  const auto ok = ssm::projection_ttc(vehicle("L", 3, 130, 20), vehicle("C", 3, 100, 25));
  EXPECT_FALSE(ok.clamped);
  EXPECT_NEAR(ok.value, 25.5 / 5.0, 1e-12);
  EXPECT_EQ(ssm::projection_ttc(vehicle("L", 3, 102, 20), vehicle("C", 3, 100, 25), 0.9).value, 0.9);
}
