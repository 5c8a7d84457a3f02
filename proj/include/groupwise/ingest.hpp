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

#ifndef GROUPWISE__INGEST_HPP_
#define GROUPWISE__INGEST_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/core/kv.hpp"
#include "groupwise/types.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace groupwise::ingest
{

inline constexpr const char * kModule = "data-ingest";

/// Timestamps that agree to within this many seconds are the same frame.
inline constexpr double kTimeTolerance = 1e-6;

inline const std::vector<std::string> & trajectory_columns()
{
  static const std::vector<std::string> cols = {
    "t_s", "vehicle_id", "vehicle_type", "x_m", "lane_id",
    "v_mps", "a_mps2", "length_m", "lateral_offset_m"};
  return cols;
}

inline void validate(const RoadGeometry & g)
{
  if (!(g.length > 0.0)) {
    throw DataError(kModule, "geometry: length_m must be positive");
  }
  if (g.lanes < 1) {
    throw DataError(kModule, "geometry: lanes must be >= 1");
  }
  auto check_pos = [&](double p, const char * what) {
    if (p < 0.0 || p > g.length) {
      throw DataError(
        kModule, std::string("geometry: ") + what + " position " + csv::fmt(p) +
                   " outside [0, length]");
    }
  };
  for (double p : g.on_ramp_positions) check_pos(p, "on-ramp");
  for (double p : g.off_ramp_positions) check_pos(p, "off-ramp");
  for (const auto & z : g.curve_zones) {
    check_pos(z.start, "curve start");
    check_pos(z.end, "curve end");
    if (!(z.start < z.end)) {
      throw DataError(kModule, "geometry: degenerate curve zone");
    }
  }
}

inline RoadGeometry parse_geometry(std::istream & in)
{
  const auto doc = kv::parse(in, kModule);
  RoadGeometry g;
  g.segment_id = doc.get("segment_id", "segment");
  const auto * length = doc.find("length_m");
  const auto * lanes = doc.find("lanes");
  if (!length || !lanes) {
    throw DataError(kModule, "geometry: length_m and lanes are required");
  }
  g.length = kv::to_double(*length, "length_m", kModule);
  const auto lanes_v = csv::parse_int(*lanes);
  if (!lanes_v) {
    throw DataError(kModule, "geometry: lanes must be an integer");
  }
  g.lanes = static_cast<int>(*lanes_v);
  const auto dir = doc.get("direction", "increasing");
  if (dir == "increasing") {
    g.direction = Direction::increasing;
  } else if (dir == "decreasing") {
    g.direction = Direction::decreasing;
  } else {
    throw DataError(kModule, "geometry: direction must be increasing|decreasing");
  }
  g.on_ramp_positions = kv::to_list(doc.get("on_ramp_m", ""), "on_ramp_m", kModule);
  g.off_ramp_positions = kv::to_list(doc.get("off_ramp_m", ""), "off_ramp_m", kModule);
  const auto curves = doc.get("curve_zones", "");
  if (!csv::trim(curves).empty()) {
    for (auto item : csv::split(curves, ';')) {
      if (item.empty()) continue;
      const auto parts = csv::split(item, ':');
      const auto a = parts.size() == 2 ? csv::parse_double(parts[0]) : std::nullopt;
      const auto b = parts.size() == 2 ? csv::parse_double(parts[1]) : std::nullopt;
      if (!a || !b) {
        throw DataError(kModule, "geometry: curve zone must be start:end");
      }
      g.curve_zones.push_back({*a, *b});
    }
  }
  validate(g);
  return g;
}

inline RoadGeometry load_geometry(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError(kModule, "cannot open geometry file " + path);
  }
  return parse_geometry(in);
}

inline void write_geometry(std::ostream & out, const RoadGeometry & g)
{
  auto list = [](const std::vector<double> & v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ';';
      s += csv::fmt(v[i]);
    }
    return s;
  };
  out << "segment_id = " << g.segment_id << '\n';
  out << "length_m = " << csv::fmt(g.length) << '\n';
  out << "lanes = " << g.lanes << '\n';
  out << "direction = " << (g.direction == Direction::increasing ? "increasing" : "decreasing")
      << '\n';
  out << "on_ramp_m = " << list(g.on_ramp_positions) << '\n';
  out << "off_ramp_m = " << list(g.off_ramp_positions) << '\n';
  out << "curve_zones = ";
  for (std::size_t i = 0; i < g.curve_zones.size(); ++i) {
    if (i) out << ';';
    out << csv::fmt(g.curve_zones[i].start) << ':' << csv::fmt(g.curve_zones[i].end);
  }
  out << '\n';
}

inline long long time_key(double t) { return std::llround(t / kTimeTolerance); }

/// Groups validated rows into frames ordered by time, states sorted by id.
/// The optional trailing columns `lane_change,origin_lane` carry sampled-frame
/// annotations so a downsampled dataset survives a write/parse cycle.
inline std::vector<Frame> parse_trajectories(std::istream & in, const RoadGeometry & geometry)
{
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> col(trajectory_columns().size());
  std::optional<std::size_t> col_change;
  std::optional<std::size_t> col_origin;
  std::size_t n_cols = 0;
  bool have_header = false;

  std::map<long long, Frame> frames;
  std::unordered_map<std::string, double> last_t;

  auto fail = [&](const std::string & what) {
    throw DataError(kModule, what + ", line " + std::to_string(line_no));
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) {
      continue;
    }
    const auto fields = csv::split(line);
    if (!have_header) {
      for (std::size_t c = 0; c < trajectory_columns().size(); ++c) {
        auto it = std::find(fields.begin(), fields.end(), trajectory_columns()[c]);
        if (it == fields.end()) {
          fail("missing column '" + trajectory_columns()[c] + "' in header");
        }
        col[c] = static_cast<std::size_t>(it - fields.begin());
      }
      if (auto it = std::find(fields.begin(), fields.end(), "lane_change"); it != fields.end()) {
        col_change = static_cast<std::size_t>(it - fields.begin());
      }
      if (auto it = std::find(fields.begin(), fields.end(), "origin_lane"); it != fields.end()) {
        col_origin = static_cast<std::size_t>(it - fields.begin());
      }
      n_cols = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols) {
      fail("malformed row: expected " + std::to_string(n_cols) + " fields");
    }
    VehicleState s;
    auto num = [&](std::size_t c, const char * name) {
      const auto v = csv::parse_double(fields[col[c]]);
      if (!v || !std::isfinite(*v)) {
        fail(std::string("malformed row: unparseable ") + name);
      }
      return *v;
    };
    s.t = num(0, "t_s");
    s.vehicle_id = std::string(fields[col[1]]);
    if (s.vehicle_id.empty()) {
      fail("malformed row: empty vehicle_id");
    }
    const auto type = parse_vehicle_type(fields[col[2]]);
    if (!type) {
      fail("malformed row: unknown vehicle_type '" + std::string(fields[col[2]]) + "'");
    }
    s.type = *type;
    s.x = num(3, "x_m");
    const auto lane = csv::parse_int(fields[col[4]]);
    if (!lane) {
      fail("malformed row: unparseable lane_id");
    }
    s.lane_id = static_cast<int>(*lane);
    s.v = num(5, "v_mps");
    s.a = num(6, "a_mps2");
    s.length = num(7, "length_m");
    s.lateral_offset = fields[col[8]].empty() ? 0.0 : num(8, "lateral_offset_m");
    s.origin_lane = s.lane_id;
    if (col_change) {
      const auto f = fields[*col_change];
      if (f != "0" && f != "1") {
        fail("malformed row: lane_change must be 0 or 1");
      }
      s.lane_change = f == "1";
    }
    if (col_origin && s.lane_change) {
      const auto o = csv::parse_int(fields[*col_origin]);
      if (!o) {
        fail("malformed row: unparseable origin_lane");
      }
      s.origin_lane = static_cast<int>(*o);
    }

    if (s.v < 0.0) {
      fail("negative speed");
    }
    if (!(s.length > 0.0)) {
      fail("non-positive vehicle length");
    }
    if (s.lane_id < 1 || s.lane_id > geometry.lanes) {
      fail("unknown lane_id " + std::to_string(s.lane_id));
    }
    if (auto it = last_t.find(s.vehicle_id); it != last_t.end()) {
      if (!(s.t > it->second + kTimeTolerance / 2)) {
        fail("non-monotone time for vehicle " + s.vehicle_id);
      }
      it->second = s.t;
    } else {
      last_t.emplace(s.vehicle_id, s.t);
    }

    auto & frame = frames[time_key(s.t)];
    if (frame.states.empty()) {
      frame.t = s.t;
    }
    s.t = frame.t;
    frame.states.push_back(std::move(s));
  }
  if (!have_header) {
    throw DataError(kModule, "missing header row");
  }

  std::vector<Frame> out;
  out.reserve(frames.size());
  for (auto & [key, frame] : frames) {
    std::sort(frame.states.begin(), frame.states.end(), [](const auto & a, const auto & b) {
      return a.vehicle_id < b.vehicle_id;
    });
    out.push_back(std::move(frame));
  }
  return out;
}

inline std::vector<Frame> load_trajectories(const std::string & path, const RoadGeometry & g)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError(kModule, "cannot open trajectory file " + path);
  }
  return parse_trajectories(in, g);
}

/// Writes frames in the input schema. With \p annotations the two
/// lane-change columns are appended.
inline void write_trajectories(
  std::ostream & out, std::span<const Frame> frames, bool annotations = true)
{
  for (std::size_t c = 0; c < trajectory_columns().size(); ++c) {
    out << (c ? "," : "") << trajectory_columns()[c];
  }
  if (annotations) {
    out << ",lane_change,origin_lane";
  }
  out << '\n';
  for (const auto & f : frames) {
    for (const auto & s : f.states) {
      out << csv::fmt(f.t) << ',' << s.vehicle_id << ',' << to_string(s.type) << ','
          << csv::fmt(s.x) << ',' << s.lane_id << ',' << csv::fmt(s.v) << ',' << csv::fmt(s.a)
          << ',' << csv::fmt(s.length) << ',' << csv::fmt(s.lateral_offset);
      if (annotations) {
        out << ',' << (s.lane_change ? 1 : 0) << ',' << (s.lane_change ? s.origin_lane : s.lane_id);
      }
      out << '\n';
    }
  }
}

/// Smallest positive spacing between consecutive frames; falls back to
/// \p fallback when fewer than two frames exist.
inline double raw_interval(std::span<const Frame> frames, double fallback)
{
  double best = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double dt = frames[i].t - frames[i - 1].t;
    if (dt > kTimeTolerance && (best == 0.0 || dt < best)) {
      best = dt;
    }
  }
  return best > 0.0 ? best : fallback;
}

/// Keeps frames at t0 + k * interval and flags a vehicle as changing lanes
/// at a kept frame when its lane id changed at any raw observation inside
/// the right-closed window (t - interval, t]. Flags already present on the
/// input are carried through, which makes the operation idempotent.
inline Dataset downsample(std::span<const Frame> raw, double interval, const RoadGeometry & geometry)
{
  if (!(interval > 0.0)) {
    throw UsageError(kModule, "sample interval must be positive");
  }
  Dataset ds;
  ds.geometry = geometry;
  ds.sample_interval = interval;
  if (raw.empty()) {
    return ds;
  }
  const double base = raw_interval(raw, interval);
  const double ratio = interval / base;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio) || std::round(ratio) < 1) {
    throw UsageError(
      kModule, "interval " + csv::fmt(interval) + " s is not an integer multiple of the raw spacing " +
                 csv::fmt(base) + " s");
  }

  struct Event
  {
    double t;
    int origin;
  };
  struct Track
  {
    int lane = 0;
    std::deque<Event> events;
  };
  std::unordered_map<std::string, Track> tracks;

  const double t0 = raw.front().t;
  for (const auto & frame : raw) {
    for (const auto & s : frame.states) {
      auto [it, fresh] = tracks.try_emplace(s.vehicle_id);
      auto & track = it->second;
      if (s.lane_change) {
        track.events.push_back({frame.t, s.origin_lane});
      } else if (!fresh && s.lane_id != track.lane) {
        track.events.push_back({frame.t, track.lane});
      }
      track.lane = s.lane_id;
    }
    const double k = std::round((frame.t - t0) / interval);
    if (std::abs(frame.t - (t0 + k * interval)) > kTimeTolerance) {
      continue;
    }
    Frame out;
    out.t = frame.t;
    out.states = frame.states;
    for (auto & s : out.states) {
      auto & track = tracks[s.vehicle_id];
      while (!track.events.empty() && track.events.front().t <= frame.t - interval + kTimeTolerance) {
        track.events.pop_front();
      }
      s.lane_change = !track.events.empty();
      s.origin_lane = s.lane_change ? track.events.back().origin : s.lane_id;
    }
    ds.frames.push_back(std::move(out));
  }
  return ds;
}

}  // namespace groupwise::ingest

#endif  // GROUPWISE__INGEST_HPP_
