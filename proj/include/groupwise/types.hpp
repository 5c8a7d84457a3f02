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

#ifndef GROUPWISE__TYPES_HPP_
#define GROUPWISE__TYPES_HPP_

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace groupwise
{

enum class VehicleType { car, heavy, bus };

inline std::string_view to_string(VehicleType t)
{
  switch (t) {
    case VehicleType::heavy:
      return "heavy";
    case VehicleType::bus:
      return "bus";
    case VehicleType::car:
    default:
      return "car";
  }
}

inline std::optional<VehicleType> parse_vehicle_type(std::string_view s)
{
  if (s == "car") return VehicleType::car;
  if (s == "heavy") return VehicleType::heavy;
  if (s == "bus") return VehicleType::bus;
  return std::nullopt;
}

inline bool is_large(VehicleType t) { return t == VehicleType::heavy || t == VehicleType::bus; }

/// One vehicle's kinematic record at one timestamp. `x` is the front-bumper
/// position along the road axis, increasing in the travel direction.
struct VehicleState
{
  std::string vehicle_id;
  double t = 0.0;
  double x = 0.0;
  int lane_id = 1;
  double v = 0.0;
  double a = 0.0;
  double length = 4.5;
  VehicleType type = VehicleType::car;
  double lateral_offset = 0.0;

  // Sampled-frame annotations: set by downsampling when the lane id changed
  // inside the window ending at this frame. `origin_lane` is the lane held
  // before the most recent change.
  bool lane_change = false;
  int origin_lane = 0;

  bool operator==(const VehicleState &) const = default;
};

/// All vehicles present at one timestamp, sorted by vehicle_id.
struct Frame
{
  double t = 0.0;
  std::vector<VehicleState> states;

  /// Index of \p id in `states`, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const
  {
    auto it = std::lower_bound(
      states.begin(), states.end(), id,
      [](const VehicleState & s, std::string_view key) { return s.vehicle_id < key; });
    if (it == states.end() || it->vehicle_id != id) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(it - states.begin());
  }

  bool operator==(const Frame &) const = default;
};

enum class Direction { increasing, decreasing };

struct CurveZone
{
  double start = 0.0;
  double end = 0.0;
  bool operator==(const CurveZone &) const = default;
};

struct RoadGeometry
{
  std::string segment_id = "segment";
  double length = 1000.0;
  int lanes = 1;
  Direction direction = Direction::increasing;
  std::vector<double> on_ramp_positions;
  std::vector<double> off_ramp_positions;
  std::vector<CurveZone> curve_zones;

  bool operator==(const RoadGeometry &) const = default;
};

struct Dataset
{
  RoadGeometry geometry;
  std::vector<Frame> frames;
  double sample_interval = 1.0;

  bool operator==(const Dataset &) const = default;
};

}  // namespace groupwise

#endif  // GROUPWISE__TYPES_HPP_
