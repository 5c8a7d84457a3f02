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

#ifndef GROUPWISE__SSM_HPP_
#define GROUPWISE__SSM_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/types.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>

namespace groupwise::ssm
{

inline constexpr const char * kModule = "ssm-core";
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Replacement value for overlapping lane-change projections.
inline constexpr double kTtcClamp = 1.25;

enum class TtcKind { in_lane, adverse, projected_adjacent, lane_change_projection };

struct TtcResult
{
  double value = kInf;  // seconds, > 0
  TtcKind kind = TtcKind::in_lane;
  bool clamped = false;

  bool finite() const { return std::isfinite(value); }
};

/// Leader braking scenario used for in-lane grouping.
struct AdverseParams
{
  double decel = 3.0;     // m/s^2, magnitude
  double duration = 1.0;  // s

  void validate() const
  {
    if (!(decel > 0.0) || !(duration > 0.0)) {
      throw UsageError(kModule, "adverse braking decel and duration must be positive");
    }
  }
};

/// Bumper-to-bumper gap when \p leader is ahead of \p follower.
inline double gap(const VehicleState & leader, const VehicleState & follower)
{
  return leader.x - follower.x - leader.length;
}

/// Closing-speed TTC for a known positive gap; +inf unless the follower is faster.
inline double ttc_from_gap(double gap_m, double v_leader, double v_follower)
{
  if (v_follower > v_leader) {
    return gap_m / (v_follower - v_leader);
  }
  return kInf;
}

/// Standard in-lane time-to-collision. Throws OverlapError when the
/// vehicles overlap, which in true in-lane data is a data-quality problem.
inline TtcResult ttc(const VehicleState & leader, const VehicleState & follower)
{
  if (leader.lane_id != follower.lane_id) {
    throw DataError(kModule, "ttc: vehicles " + leader.vehicle_id + " and " +
                               follower.vehicle_id + " are not in the same lane");
  }
  const double g = gap(leader, follower);
  if (!(g > 0.0)) {
    throw OverlapError(kModule, "overlapping vehicles " + leader.vehicle_id + " and " +
                                  follower.vehicle_id + " in lane " +
                                  std::to_string(leader.lane_id));
  }
  return {ttc_from_gap(g, leader.v, follower.v), TtcKind::in_lane, false};
}

/// TTC after the leader brakes at `decel` for `duration` while the follower
/// holds its speed. The leader's speed is floored at zero: once stopped it
/// stays put for the rest of the braking window.
///
/// If the gap closes before the window ends the collision already happens
/// inside the braking phase; the result is then the time from now until that
/// contact, which is always below the window length.
inline TtcResult adverse_ttc(
  const VehicleState & leader, const VehicleState & follower, const AdverseParams & params = {})
{
  // Validates lanes and the initial gap.
  (void)ttc(leader, follower);
  const double a = params.decel;
  const double tb = params.duration;
  const double g0 = gap(leader, follower);
  const double vl = leader.v;
  const double vf = follower.v;
  const double t_stop = vl / a;

  auto gap_at = [&](double tau) {
    const double s = std::min(tau, t_stop);
    const double lead_dx = vl * s - 0.5 * a * s * s;
    return g0 + lead_dx - vf * tau;
  };

  const double g_end = gap_at(tb);
  if (g_end > 0.0) {
    const double vl_end = std::max(0.0, vl - a * tb);
    return {ttc_from_gap(g_end, vl_end, vf), TtcKind::adverse, false};
  }

  // First root of the gap in (0, tb]. Before the stop the gap is the concave
  // quadratic g0 + (vl - vf) tau - a tau^2 / 2; afterwards it falls linearly.
  double contact = 0.0;
  const double t_q = std::min(t_stop, tb);
  if (gap_at(t_q) <= 0.0) {
    // Positive root of -a/2 tau^2 + (vl - vf) tau + g0 = 0.
    // Use the cancellation-free form when the follower is faster (b <= 0).
    const double b = vl - vf;
    const double root = std::sqrt(b * b + 2.0 * a * g0);
    contact = b <= 0.0 ? 2.0 * g0 / (root - b) : (b + root) / a;
    contact = std::min(contact, t_q);
  } else {
    contact = t_stop + gap_at(t_stop) / vf;
  }
  return {contact, TtcKind::adverse, false};
}

/// TTC of two adjacent-lane vehicles from their headway projected on the
/// lane line between them. Projection keeps the along-road coordinate, so
/// the vehicle with larger x leads. Returns nullopt when the projected
/// vehicles overlap (projected gap <= 0).
inline std::optional<TtcResult> projected_ttc(const VehicleState & a, const VehicleState & b)
{
  if (std::abs(a.lane_id - b.lane_id) != 1) {
    throw DataError(kModule, "projected_ttc: vehicles " + a.vehicle_id + " and " + b.vehicle_id +
                               " are not in adjacent lanes");
  }
  const bool a_leads = a.x > b.x || (a.x == b.x && a.vehicle_id < b.vehicle_id);
  const auto & leader = a_leads ? a : b;
  const auto & follower = a_leads ? b : a;
  const double g = gap(leader, follower);
  if (!(g > 0.0)) {
    return std::nullopt;
  }
  return TtcResult{ttc_from_gap(g, leader.v, follower.v), TtcKind::projected_adjacent, false};
}

/// Copies of a lane-changing vehicle placed in both its origin and target
/// lanes. Index 0 is the origin-lane copy.
inline std::array<VehicleState, 2> lane_change_projections(
  const VehicleState & changer, int origin_lane, int target_lane)
{
  if (origin_lane == target_lane) {
    throw DataError(kModule, "lane change of " + changer.vehicle_id + " has origin == target");
  }
  std::array<VehicleState, 2> out{changer, changer};
  out[0].lane_id = origin_lane;
  out[1].lane_id = target_lane;
  return out;
}

/// Same-lane TTC where at least one side is a lane-change projection.
/// Overlap is replaced by \p clamp and flagged.
inline TtcResult projection_ttc(
  const VehicleState & leader, const VehicleState & follower, double clamp = kTtcClamp)
{
  const double g = gap(leader, follower);
  if (!(g > 0.0)) {
    return {clamp, TtcKind::lane_change_projection, true};
  }
  return {ttc_from_gap(g, leader.v, follower.v), TtcKind::lane_change_projection, false};
}

}  // namespace groupwise::ssm

#endif  // GROUPWISE__SSM_HPP_
