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

#ifndef GROUPWISE_TESTS__GROUPING_FIXTURES_HPP_
#define GROUPWISE_TESTS__GROUPING_FIXTURES_HPP_

#include "groupwise/grouping.hpp"
#include "oracles.hpp"

#include <set>
#include <string>
#include <vector>

namespace fixtures
{

using groupwise::Frame;
using groupwise::VehicleState;

inline Frame frame(double t, std::vector<VehicleState> states)
{
  Frame f;
  f.t = t;
  for (auto & s : states) s.t = t;
  std::sort(states.begin(), states.end(),
            [](const auto & a, const auto & b) { return a.vehicle_id < b.vehicle_id; });
  f.states = std::move(states);
  return f;
}

inline std::set<std::set<std::string>> id_sets(const std::vector<groupwise::grouping::VehicleGroup> & gs)
{
  std::set<std::set<std::string>> out;
  for (const auto & g : gs) out.insert({g.member_ids.begin(), g.member_ids.end()});
  return out;
}

/// Groups by thresholding every vehicle pair directly: consecutive same-lane
/// pairs by adverse TTC, adjacent-lane pairs by projected TTC (overlap
/// couples), then connected components.
inline std::set<std::set<std::string>> brute_force_groups(
  const Frame & f, const groupwise::grouping::FrameThresholds & th, const groupwise::ssm::AdverseParams & p = {})
{
  const std::size_t n = f.states.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto & a = f.states[i];
      const auto & b = f.states[j];
      bool link = false;
      if (a.lane_id == b.lane_id) {
        // a directly ahead of b: nobody in the lane strictly between them.
        const bool ahead = a.x > b.x || (a.x == b.x && a.vehicle_id < b.vehicle_id);
        if (!ahead) continue;
        bool between = false;
        for (std::size_t k = 0; k < n; ++k) {
          const auto & c = f.states[k];
          if (k == i || k == j || c.lane_id != a.lane_id) continue;
          const bool c_behind_a = a.x > c.x || (a.x == c.x && a.vehicle_id < c.vehicle_id);
          const bool c_ahead_b = c.x > b.x || (c.x == b.x && c.vehicle_id < b.vehicle_id);
          if (c_behind_a && c_ahead_b) between = true;
        }
        link = !between && groupwise::ssm::adverse_ttc(a, b, p).value < th.ttc_in;
      } else if (std::abs(a.lane_id - b.lane_id) == 1) {
        const auto r = groupwise::ssm::projected_ttc(a, b);
        link = !r || r->value < th.ttc_cross;
      }
      if (link) adj[i][j] = adj[j][i] = true;
    }
  }
  return oracle::components(f, adj);
}

/// A group splits off one of its heads. At j-1 group II = {v4,v5,v6,v7} has heads v4
/// (lane 1) and v6 (lane 2). At j, v6 has dropped away from its followers and
/// is alone as group III = {v6}; group II = {v4,v5,v7,v8} keeps head v4.
/// Group I = {v1,v2,v3} is unchanged.
inline std::pair<Frame, Frame> head_split()
{
  using oracle::vehicle;
  // 9 m spacing at 20 m/s links in-lane (adverse TTC 1.0 s); side-by-side
  // vehicles in adjacent lanes couple their chains.
  Frame a = frame(0.0, {vehicle("v1", 1, 500, 20), vehicle("v2", 1, 491, 20), vehicle("v3", 1, 482, 20),
                        vehicle("v4", 1, 300, 20), vehicle("v5", 1, 291, 20), vehicle("v6", 2, 302, 20),
                        vehicle("v7", 2, 293, 20)});
  Frame b = frame(1.0, {vehicle("v1", 1, 520, 20), vehicle("v2", 1, 511, 20), vehicle("v3", 1, 502, 20),
                        vehicle("v4", 1, 320, 20), vehicle("v5", 1, 311, 20), vehicle("v8", 1, 302, 20),
                        vehicle("v6", 2, 340, 20), vehicle("v7", 2, 313, 20)});
  return {a, b};
}

}  // namespace fixtures

#endif  // GROUPWISE_TESTS__GROUPING_FIXTURES_HPP_
