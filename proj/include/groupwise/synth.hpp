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

#ifndef GROUPWISE__SYNTH_HPP_
#define GROUPWISE__SYNTH_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/core/kv.hpp"
#include "groupwise/core/rng.hpp"
#include "groupwise/ingest.hpp"
#include "groupwise/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace groupwise::synth
{

inline constexpr const char * kModule = "synth-sim";
inline constexpr double kLaneWidth = 3.5;
inline constexpr double kLaneChangeDuration = 2.0;
// Hard floor on bumper gaps kept by the integrator.
inline constexpr double kMinSafetyGap = 0.5;

/// Piecewise-linear function of time given as knots; constant outside.
struct Profile
{
  std::vector<std::pair<double, double>> knots;

  double at(double t) const
  {
    if (knots.empty()) return 0.0;
    if (t <= knots.front().first) return knots.front().second;
    if (t >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (t <= knots[i].first) {
        const auto [t0, v0] = knots[i - 1];
        const auto [t1, v1] = knots[i];
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return knots.back().second;
  }

  /// Right derivative at t.
  double slope(double t) const
  {
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (t >= knots[i - 1].first && t < knots[i].first) {
        return (knots[i].second - knots[i - 1].second) / (knots[i].first - knots[i - 1].first);
      }
    }
    return 0.0;
  }

  /// Integral from \p a to \p b (a <= b).
  double integral(double a, double b) const
  {
    if (knots.empty() || b <= a) return 0.0;
    std::vector<double> pts = {a};
    for (const auto & k : knots) {
      if (k.first > a && k.first < b) pts.push_back(k.first);
    }
    pts.push_back(b);
    double s = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      s += 0.5 * (at(pts[i - 1]) + at(pts[i])) * (pts[i] - pts[i - 1]);
    }
    return s;
  }

  static Profile constant(double v) { return {{{0.0, v}}}; }
};

/// Scripted single-lane platoon: the leader follows `speed`, every member
/// keeps the same bumper gap `gap` to the vehicle ahead.
struct PlatoonDirective
{
  std::string name;
  int lane = 1;
  std::size_t size = 5;
  double x0 = 100.0;  // leader front bumper at start_s
  Profile speed = Profile::constant(20.0);
  Profile gap = Profile::constant(10.0);
  double start_s = 0.0;
  double end_s = 1e9;
  double length = 4.5;
  VehicleType type = VehicleType::car;
};

struct ScenarioSpec
{
  std::uint64_t seed = 1;
  double duration = 60.0;
  double raw_rate = 25.0;
  RoadGeometry geometry;

  // Background traffic.
  double arrival_rate = 0.0;       // veh/s per lane at x = 0
  double initial_density = 0.0;    // veh/m per lane at t = 0
  double desired_speed_mean = 28.0;
  double desired_speed_sd = 3.0;
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double time_headway = 1.2;
  double min_gap = 2.0;
  double lane_change_prob = 0.0;   // per vehicle per second
  double frac_heavy = 0.0;
  double frac_bus = 0.0;
  double on_ramp_rate = 0.0;       // veh/s entering lane 1 at each on-ramp
  double off_ramp_prob = 0.0;      // chance a lane-1 vehicle leaves at each off-ramp
  double curve_speed_factor = 0.85;

  // Risk dynamics: hard-braking episodes and autocorrelated acceleration noise.
  double perturbation_rate = 0.0;  // episodes per vehicle per second
  double perturbation_decel = 4.0;
  double perturbation_duration = 2.0;
  double accel_noise_sd = 0.0;
  double accel_noise_tau = 5.0;
  // Tailgating episodes: the driver closes on its leader at a fixed relative
  // speed until a short target gap, then resumes normal car following.
  double tailgate_rate = 0.0;  // episodes per vehicle per second
  double tailgate_dv_min = 1.0;
  double tailgate_dv_max = 4.0;
  double tailgate_gap_min = 2.0;
  double tailgate_gap_max = 8.0;
  double tailgate_duration = 15.0;  // upper bound on an episode

  std::vector<PlatoonDirective> platoons;

  // Ground-truth sidecar settings.
  double sidecar_interval = 5.0;
  double sidecar_ttc_in = 1.5;
  double sidecar_high_risk_ttc = 1.5;
  double sidecar_decel = 3.0;
  double sidecar_brake_time = 1.0;
};

inline Profile parse_profile(const std::string & s, const std::string & key)
{
  Profile p;
  const auto items = csv::split(s, ';');
  if (items.size() == 1 && items[0].find(':') == std::string_view::npos) {
    return Profile::constant(kv::to_double(std::string(items[0]), key, kModule));
  }
  for (auto item : items) {
    if (item.empty()) continue;
    const auto parts = csv::split(item, ':');
    if (parts.size() != 2) throw DataError(kModule, key + ": profile entries must be t:value");
    p.knots.emplace_back(kv::to_double(std::string(parts[0]), key, kModule),
                         kv::to_double(std::string(parts[1]), key, kModule));
  }
  for (std::size_t i = 1; i < p.knots.size(); ++i) {
    if (!(p.knots[i].first > p.knots[i - 1].first)) {
      throw DataError(kModule, key + ": profile times must increase");
    }
  }
  if (p.knots.empty()) throw DataError(kModule, key + ": empty profile");
  return p;
}

/// Scenario file: flat key = value. Geometry keys follow the geometry file;
/// each `platoon.name` line opens a new platoon block that the following
/// `platoon.*` keys fill.
inline ScenarioSpec parse_scenario(std::istream & in)
{
  const auto doc = kv::parse(in, kModule);
  ScenarioSpec s;
  auto num = [&](const std::string & k, double & dst) {
    if (const auto * v = doc.find(k)) dst = kv::to_double(*v, k, kModule);
  };
  if (const auto * v = doc.find("seed")) {
    const auto n = csv::parse_int(*v);
    if (!n || *n < 0) throw DataError(kModule, "seed must be a non-negative integer");
    s.seed = static_cast<std::uint64_t>(*n);
  }
  num("duration_s", s.duration);
  num("raw_rate_hz", s.raw_rate);
  num("arrival_rate_vps", s.arrival_rate);
  num("initial_density_vpm", s.initial_density);
  num("desired_speed_mean", s.desired_speed_mean);
  num("desired_speed_sd", s.desired_speed_sd);
  num("max_accel", s.max_accel);
  num("comfort_decel", s.comfort_decel);
  num("time_headway", s.time_headway);
  num("min_gap", s.min_gap);
  num("lane_change_prob", s.lane_change_prob);
  num("frac_heavy", s.frac_heavy);
  num("frac_bus", s.frac_bus);
  num("on_ramp_rate_vps", s.on_ramp_rate);
  num("off_ramp_prob", s.off_ramp_prob);
  num("curve_speed_factor", s.curve_speed_factor);
  num("perturbation_rate", s.perturbation_rate);
  num("perturbation_decel", s.perturbation_decel);
  num("perturbation_duration_s", s.perturbation_duration);
  num("accel_noise_sd", s.accel_noise_sd);
  num("accel_noise_tau_s", s.accel_noise_tau);
  num("tailgate_rate", s.tailgate_rate);
  num("tailgate_dv_min", s.tailgate_dv_min);
  num("tailgate_dv_max", s.tailgate_dv_max);
  num("tailgate_gap_min_m", s.tailgate_gap_min);
  num("tailgate_gap_max_m", s.tailgate_gap_max);
  num("tailgate_duration_s", s.tailgate_duration);
  num("sidecar_interval_s", s.sidecar_interval);
  num("sidecar_ttc_in", s.sidecar_ttc_in);
  num("sidecar_high_risk_ttc", s.sidecar_high_risk_ttc);
  num("sidecar_decel", s.sidecar_decel);
  num("sidecar_brake_time", s.sidecar_brake_time);

  // Geometry shares the geometry-file keys.
  kv::Document geo;
  for (const auto & [k, v] : doc.entries) {
    if (k == "segment_id" || k == "length_m" || k == "lanes" || k == "direction" ||
        k == "on_ramp_m" || k == "off_ramp_m" || k == "curve_zones") {
      geo.entries.emplace_back(k, v);
    }
  }
  {
    std::string text;
    for (const auto & [k, v] : geo.entries) text += k + " = " + v + "\n";
    if (!geo.find("length_m")) text += "length_m = 1000\n";
    if (!geo.find("lanes")) text += "lanes = 1\n";
    std::istringstream gin(text);
    s.geometry = ingest::parse_geometry(gin);
  }

  PlatoonDirective * cur = nullptr;
  for (const auto & [k, v] : doc.entries) {
    if (k.rfind("platoon.", 0) != 0) continue;
    const auto field = k.substr(8);
    if (field == "name") {
      s.platoons.emplace_back();
      cur = &s.platoons.back();
      cur->name = v;
      continue;
    }
    if (!cur) throw DataError(kModule, "platoon key '" + k + "' before platoon.name");
    if (field == "lane") {
      cur->lane = static_cast<int>(kv::to_double(v, k, kModule));
    } else if (field == "size") {
      cur->size = static_cast<std::size_t>(kv::to_double(v, k, kModule));
    } else if (field == "x0") {
      cur->x0 = kv::to_double(v, k, kModule);
    } else if (field == "speed") {
      cur->speed = parse_profile(v, k);
    } else if (field == "gap") {
      cur->gap = parse_profile(v, k);
    } else if (field == "adverse_ttc") {
      // Equal-speed gap whose adverse-braking TTC equals the given value.
      const double ttc = kv::to_double(v, k, kModule);
      const double a = s.sidecar_decel;
      const double tb = s.sidecar_brake_time;
      cur->gap = Profile::constant(a * tb * ttc + 0.5 * a * tb * tb);
    } else if (field == "start_s") {
      cur->start_s = kv::to_double(v, k, kModule);
    } else if (field == "end_s") {
      cur->end_s = kv::to_double(v, k, kModule);
    } else if (field == "length_m") {
      cur->length = kv::to_double(v, k, kModule);
    } else if (field == "type") {
      const auto t = parse_vehicle_type(v);
      if (!t) throw DataError(kModule, k + ": unknown vehicle type");
      cur->type = *t;
    } else {
      throw DataError(kModule, "unknown platoon key '" + k + "'");
    }
  }
  return s;
}

inline void validate(const ScenarioSpec & s)
{
  auto nonneg = [](double v, const char * what) {
    if (!(v >= 0.0)) throw DataError(kModule, std::string(what) + " must be >= 0");
  };
  if (!(s.duration > 0.0) || !(s.raw_rate > 0.0)) {
    throw DataError(kModule, "duration and raw rate must be positive");
  }
  nonneg(s.arrival_rate, "arrival rate");
  nonneg(s.initial_density, "initial density");
  nonneg(s.lane_change_prob, "lane-change probability");
  nonneg(s.frac_heavy, "heavy fraction");
  nonneg(s.frac_bus, "bus fraction");
  nonneg(s.on_ramp_rate, "on-ramp rate");
  nonneg(s.off_ramp_prob, "off-ramp probability");
  nonneg(s.perturbation_rate, "perturbation rate");
  nonneg(s.accel_noise_sd, "acceleration noise");
  nonneg(s.tailgate_rate, "tailgate rate");
  if (s.tailgate_rate > 0.0 && !(s.tailgate_dv_min > 0.0 && s.tailgate_dv_max >= s.tailgate_dv_min &&
                                 s.tailgate_gap_min > kMinSafetyGap && s.tailgate_gap_max >= s.tailgate_gap_min &&
                                 s.tailgate_duration > 0.0)) {
    throw DataError(kModule, "tailgate parameters inconsistent");
  }
  if (s.frac_heavy + s.frac_bus > 1.0) throw DataError(kModule, "vehicle type fractions exceed 1");
  if (!(s.max_accel > 0.0) || !(s.comfort_decel > 0.0) || !(s.time_headway > 0.0) ||
      !(s.min_gap > 0.0)) {
    throw DataError(kModule, "car-following parameters must be positive");
  }
  for (const auto & p : s.platoons) {
    if (p.lane < 1 || p.lane > s.geometry.lanes) {
      throw DataError(kModule, "platoon " + p.name + ": lane outside the road");
    }
    if (p.size < 1) throw DataError(kModule, "platoon " + p.name + ": empty");
    if (!(p.end_s > p.start_s)) throw DataError(kModule, "platoon " + p.name + ": end before start");
    // Gaps must stay positive and every member's speed non-negative at every knot
    // of both profiles (the profiles are linear in between).
    std::vector<double> ts = {p.start_s, std::min(p.end_s, s.duration)};
    for (const auto & k : p.speed.knots) ts.push_back(k.first);
    for (const auto & k : p.gap.knots) ts.push_back(k.first);
    for (double t : ts) {
      if (t < p.start_s || t > p.end_s) continue;
      if (!(p.gap.at(t) > 0.0)) {
        throw DataError(kModule, "infeasible platoon " + p.name + ": non-positive gap");
      }
      for (double tt : {t, std::max(p.start_s, t - 1e-9)}) {
        const double rear_v =
          p.speed.at(tt) - static_cast<double>(p.size - 1) * p.gap.slope(tt);
        if (p.speed.at(tt) < 0.0 || rear_v < -1e-9) {
          throw DataError(kModule, "infeasible platoon " + p.name + ": negative member speed");
        }
      }
    }
  }
}

struct SidecarRow
{
  double t = 0.0;
  std::string platoon;
  std::vector<std::string> members;
  std::string pattern;  // expected pattern of the platoon leader's group trajectory
};

struct SynthOutput
{
  RoadGeometry geometry;
  std::vector<Frame> frames;
  std::vector<SidecarRow> sidecar;
  std::size_t vehicles = 0;
};

namespace detail
{

struct Agent
{
  VehicleState s;
  double desired = 28.0;
  double accel = 1.5;
  double decel = 2.0;
  double headway = 1.2;
  double noise = 0.0;
  double brake_until = -1.0;
  double tailgate_until = -1.0;
  double tailgate_dv = 0.0;
  double tailgate_gap = 0.0;
  double lc_start = -1e9;
  int lc_from = 0;
  bool alive = true;
  bool scripted = false;
  std::size_t platoon = 0;
  std::size_t rank = 0;
};

inline std::string vid(std::size_t n)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%06zu", n);
  return buf;
}

inline double idm_accel(const Agent & me, const Agent * lead, double min_gap, double desired)
{
  const double v = me.s.v;
  double free = 1.0 - std::pow(v / std::max(desired, 0.1), 4.0);
  if (!lead) return me.accel * free;
  const double gap = std::max(lead->s.x - lead->s.length - me.s.x, 0.01);
  const double dv = v - lead->s.v;
  const double s_star =
    min_gap + std::max(0.0, v * me.headway + v * dv / (2.0 * std::sqrt(me.accel * me.decel)));
  return me.accel * (free - (s_star / gap) * (s_star / gap));
}

/// Expected sidecar classification of a per-frame high-risk count series;
/// kept separate from the risk module so the oracle stays independent.
inline std::string expected_pattern(const std::vector<std::size_t> & q)
{
  if (q.size() < 2) return "";
  bool flat = true, up = true, down = true;
  for (std::size_t i = 1; i < q.size(); ++i) {
    flat = flat && q[i] == q[i - 1];
    up = up && q[i] >= q[i - 1];
    down = down && q[i] <= q[i - 1];
  }
  if (flat) return "maintaining";
  if (up && q.back() > q.front()) return "diffusion";
  if (down && q.back() < q.front()) return "dissipation";
  return "fluctuation";
}

}  // namespace detail

/// Leader front-bumper position of a platoon at time t.
inline double platoon_leader_x(const PlatoonDirective & p, double t)
{
  return p.x0 + p.speed.integral(p.start_s, t);
}

/// Ground truth for the scripted platoons on a grid of `sidecar_interval`,
/// derived from the scripted gaps and speeds alone.
inline std::vector<SidecarRow> sidecar(const ScenarioSpec & spec)
{
  std::vector<SidecarRow> rows;
  const double dt = spec.sidecar_interval;
  for (const auto & p : spec.platoons) {
    std::vector<std::size_t> q_series;
    std::vector<std::size_t> first_row;
    for (long long k = 0; k * dt <= spec.duration + 1e-9; ++k) {
      const double t = static_cast<double>(k) * dt;
      // Only grid times where the scripted raw frames exist.
      if (t < p.start_s - 1e-9 || t > p.end_s + 1e-9 || t > spec.duration - 1.0 / spec.raw_rate + 1e-9) continue;
      const double lead_x = platoon_leader_x(p, t);
      const double g = p.gap.at(t);
      const double rear_x = lead_x - static_cast<double>(p.size - 1) * (g + p.length);
      if (lead_x > spec.geometry.length || rear_x < 0.0) continue;
      // Followers close on their leaders at -gap'(t).
      const double closing = -p.gap.slope(t);
      const double v_lead = p.speed.at(t);
      const double a = spec.sidecar_decel;
      const double tb = spec.sidecar_brake_time;
      bool linked = false;
      if (v_lead >= a * tb) {
        const double g_after = g - 0.5 * a * tb * tb - closing * tb;
        const double rel = a * tb + closing;
        linked = g_after <= 0.0 || (rel > 0.0 && g_after / rel < spec.sidecar_ttc_in);
      }
      const bool high = closing > 0.0 && g / closing < spec.sidecar_high_risk_ttc;
      std::vector<std::vector<std::string>> groups;
      for (std::size_t m = 0; m < p.size; ++m) {
        if (m == 0 || !linked) groups.emplace_back();
        groups.back().push_back("p_" + p.name + "_" + std::to_string(m));
      }
      q_series.push_back(linked && high ? p.size - 1 : 0);
      first_row.push_back(rows.size());
      for (auto & members : groups) {
        std::sort(members.begin(), members.end());
        rows.push_back({t, p.name, std::move(members), ""});
      }
    }
    const auto pattern = detail::expected_pattern(q_series);
    for (auto r : first_row) {
      for (std::size_t i = r; i < rows.size() && rows[i].platoon == p.name; ++i) rows[i].pattern = pattern;
    }
  }
  return rows;
}

/// Car-following simulation (Intelligent Driver Model with a hard gap
/// floor) at the raw rate, plus scripted platoons.
inline SynthOutput generate(const ScenarioSpec & spec)
{
  validate(spec);
  Rng rng(spec.seed);
  const auto & geo = spec.geometry;
  const double dt = 1.0 / spec.raw_rate;
  const auto steps = static_cast<long long>(std::floor(spec.duration * spec.raw_rate + 1e-9));

  std::vector<detail::Agent> agents;
  std::size_t next_id = 0;

  auto make_agent = [&](int lane, double x, double v) {
    detail::Agent ag;
    ag.s.vehicle_id = detail::vid(next_id++);
    ag.s.lane_id = lane;
    ag.s.x = x;
    const double u = rng.uniform();
    if (u < spec.frac_heavy) {
      ag.s.type = VehicleType::heavy;
      ag.s.length = 10.0;
    } else if (u < spec.frac_heavy + spec.frac_bus) {
      ag.s.type = VehicleType::bus;
      ag.s.length = 12.0;
    } else {
      ag.s.type = VehicleType::car;
      ag.s.length = rng.uniform(4.2, 5.0);
    }
    const bool large = is_large(ag.s.type);
    ag.desired = std::max(5.0, rng.normal(spec.desired_speed_mean, spec.desired_speed_sd)) *
                 (large ? 0.85 : 1.0);
    ag.accel = spec.max_accel * (large ? 0.6 : 1.0);
    ag.decel = spec.comfort_decel;
    ag.headway = spec.time_headway * rng.uniform(0.8, 1.2);
    ag.s.v = std::min(v, ag.desired);
    ag.s.origin_lane = lane;
    return ag;
  };

  // Equilibrium-spaced initial population.
  if (spec.initial_density > 0.0) {
    for (int lane = 1; lane <= geo.lanes; ++lane) {
      const double spacing = 1.0 / spec.initial_density;
      for (double x = geo.length - rng.uniform(0.0, spacing); x > 0.0;
           x -= spacing * rng.uniform(0.8, 1.2)) {
        auto ag = make_agent(lane, x, spec.desired_speed_mean);
        // Speed consistent with the available spacing.
        const double s = spacing - ag.s.length - spec.min_gap;
        ag.s.v = std::clamp(s / ag.headway, 0.0, ag.desired);
        agents.push_back(std::move(ag));
      }
    }
  }
  std::vector<double> next_arrival(static_cast<std::size_t>(geo.lanes), 0.0);
  for (auto & t : next_arrival) {
    t = spec.arrival_rate > 0.0 ? rng.exponential(spec.arrival_rate) : 1e18;
  }
  std::vector<double> next_ramp(geo.on_ramp_positions.size(), 1e18);
  for (auto & t : next_ramp) {
    if (spec.on_ramp_rate > 0.0) t = rng.exponential(spec.on_ramp_rate);
  }
  std::vector<int> pending(static_cast<std::size_t>(geo.lanes), 0);

  // Scripted platoon members are created up front and activated in time.
  for (std::size_t pi = 0; pi < spec.platoons.size(); ++pi) {
    const auto & p = spec.platoons[pi];
    for (std::size_t m = 0; m < p.size; ++m) {
      detail::Agent ag;
      ag.s.vehicle_id = "p_" + p.name + "_" + std::to_string(m);
      ag.s.lane_id = p.lane;
      ag.s.origin_lane = p.lane;
      ag.s.length = p.length;
      ag.s.type = p.type;
      ag.scripted = true;
      ag.platoon = pi;
      ag.rank = m;
      ag.alive = false;
      agents.push_back(std::move(ag));
    }
  }

  auto in_curve = [&](double x) {
    return std::any_of(geo.curve_zones.begin(), geo.curve_zones.end(),
                       [x](const CurveZone & z) { return x >= z.start && x <= z.end; });
  };
  auto scripted_x = [&](const detail::Agent & ag, double t) {
    const auto & p = spec.platoons[ag.platoon];
    return platoon_leader_x(p, t) - static_cast<double>(ag.rank) * (p.gap.at(t) + p.length);
  };
  auto place_scripted = [&](detail::Agent & ag, double t) {
    const auto & p = spec.platoons[ag.platoon];
    const double k = static_cast<double>(ag.rank);
    ag.s.x = scripted_x(ag, t);
    ag.s.v = std::max(0.0, p.speed.at(t) - k * p.gap.slope(t));
    ag.s.a = p.speed.slope(t);
    const bool active = t >= p.start_s - 1e-9 && t <= p.end_s + 1e-9;
    ag.alive = active && ag.s.x <= geo.length && ag.s.x >= 0.0;
  };

  SynthOutput out;
  out.geometry = geo;
  std::vector<std::vector<std::size_t>> lanes(static_cast<std::size_t>(geo.lanes) + 1);
  auto rebuild = [&] {
    for (auto & l : lanes) l.clear();
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (agents[i].alive) lanes[static_cast<std::size_t>(agents[i].s.lane_id)].push_back(i);
    }
    for (auto & l : lanes) {
      std::sort(l.begin(), l.end(), [&](std::size_t a, std::size_t b) {
        return agents[a].s.x != agents[b].s.x ? agents[a].s.x > agents[b].s.x
                                              : agents[a].s.vehicle_id < agents[b].s.vehicle_id;
      });
    }
  };
  // Nearest vehicles ahead of / behind position x in a lane.
  auto neighbours = [&](int lane, double x, std::size_t self) {
    std::pair<const detail::Agent *, const detail::Agent *> nb{nullptr, nullptr};
    for (auto j : lanes[static_cast<std::size_t>(lane)]) {
      if (j == self) continue;
      if (agents[j].s.x >= x) {
        nb.first = &agents[j];
      } else {
        nb.second = &agents[j];
        break;
      }
    }
    return nb;
  };

  for (long long step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) / spec.raw_rate;
    for (auto & ag : agents) {
      if (ag.scripted) place_scripted(ag, t);
    }
    rebuild();

    // Arrivals at the upstream boundary and on-ramps.
    for (int lane = 1; lane <= geo.lanes; ++lane) {
      auto & na = next_arrival[static_cast<std::size_t>(lane - 1)];
      while (na <= t) {
        ++pending[static_cast<std::size_t>(lane - 1)];
        na += rng.exponential(spec.arrival_rate);
      }
      auto & pend = pending[static_cast<std::size_t>(lane - 1)];
      if (pend > 0) {
        const auto & l = lanes[static_cast<std::size_t>(lane)];
        const detail::Agent * last = l.empty() ? nullptr : &agents[l.back()];
        auto ag = make_agent(lane, 0.0, spec.desired_speed_mean);
        const double need = spec.min_gap + ag.s.v * ag.headway * 0.6;
        if (!last || last->s.x - last->s.length - 0.0 > need) {
          if (last) ag.s.v = std::min(ag.s.v, last->s.v + 2.0);
          agents.push_back(std::move(ag));
          --pend;
          rebuild();
        } else {
          --next_id;  // not inserted; reuse the id
        }
      }
    }
    for (std::size_t r = 0; r < next_ramp.size(); ++r) {
      if (next_ramp[r] > t) continue;
      next_ramp[r] = t + rng.exponential(spec.on_ramp_rate);
      const double x = geo.on_ramp_positions[r];
      const auto nb = neighbours(1, x, agents.size());
      auto ag = make_agent(1, x, spec.desired_speed_mean * 0.8);
      const bool lead_ok = !nb.first || nb.first->s.x - nb.first->s.length - x > spec.min_gap + 5.0;
      const bool foll_ok =
        !nb.second || x - ag.s.length - nb.second->s.x > spec.min_gap + nb.second->s.v * 0.5;
      if (lead_ok && foll_ok && !(nb.second && nb.second->scripted)) {
        if (nb.first) ag.s.v = std::min(ag.s.v, nb.first->s.v + 1.0);
        agents.push_back(std::move(ag));
        rebuild();
      } else {
        --next_id;
      }
    }

    // Record the state at t.
    Frame frame;
    frame.t = t;
    for (auto & ag : agents) {
      if (!ag.alive) continue;
      ag.s.t = t;
      const double since = std::max(0.0, t - ag.lc_start);  // lc_start is t + dt, inexact
      ag.s.lateral_offset =
        since < kLaneChangeDuration
          ? static_cast<double>(ag.lc_from - ag.s.lane_id) * kLaneWidth * (1.0 - since / kLaneChangeDuration)
          : 0.0;
      frame.states.push_back(ag.s);
    }
    std::sort(frame.states.begin(), frame.states.end(),
              [](const auto & a, const auto & b) { return a.vehicle_id < b.vehicle_id; });
    for (const auto & l : lanes) {
      for (std::size_t k = 1; k < l.size(); ++k) {
        const auto & lead = agents[l[k - 1]];
        const auto & foll = agents[l[k]];
        if (!(lead.s.x - lead.s.length - foll.s.x > 0.0)) {
          throw DataError(kModule, "infeasible planted directive: " + foll.s.vehicle_id +
                                     " overlaps " + lead.s.vehicle_id + " at t=" + csv::fmt(t));
        }
      }
    }
    out.frames.push_back(std::move(frame));

    // Lane changes: random attempts accepted when both new gaps are safe.
    for (std::size_t i = 0; i < agents.size(); ++i) {
      auto & ag = agents[i];
      if (!ag.alive || ag.scripted || geo.lanes < 2) continue;
      if (t - ag.lc_start < 3.0 * kLaneChangeDuration) continue;
      if (!rng.bernoulli(spec.lane_change_prob * dt)) continue;
      int target = ag.s.lane_id + (rng.bernoulli(0.5) ? 1 : -1);
      if (target < 1) target = 2;
      if (target > geo.lanes) target = geo.lanes - 1;
      const auto nb = neighbours(target, ag.s.x, i);
      if ((nb.first && nb.first->scripted) || (nb.second && nb.second->scripted)) continue;
      const double lead_gap = nb.first ? nb.first->s.x - nb.first->s.length - ag.s.x : 1e9;
      const double foll_gap = nb.second ? ag.s.x - ag.s.length - nb.second->s.x : 1e9;
      if (lead_gap < spec.min_gap || foll_gap < spec.min_gap) continue;
      // Safety: the new follower must not need to brake harder than 4 m/s^2.
      if (nb.second) {
        detail::Agent me_as_lead = ag;
        const double acc = detail::idm_accel(*nb.second, &me_as_lead, spec.min_gap, nb.second->desired);
        if (acc < -4.0) continue;
      }
      ag.lc_from = ag.s.lane_id;
      ag.lc_start = t + dt;
      ag.s.lane_id = target;
      rebuild();
    }

    // Longitudinal update, front to back in each lane.
    for (int lane = 1; lane <= geo.lanes; ++lane) {
      const auto & l = lanes[static_cast<std::size_t>(lane)];
      for (std::size_t k = 0; k < l.size(); ++k) {
        auto & ag = agents[l[k]];
        if (ag.scripted) continue;
        const detail::Agent * lead = k > 0 ? &agents[l[k - 1]] : nullptr;
        const double desired = ag.desired * (in_curve(ag.s.x) ? spec.curve_speed_factor : 1.0);
        double acc = detail::idm_accel(ag, lead, spec.min_gap, desired);
        if (spec.accel_noise_sd > 0.0) {
          const double decay = std::exp(-dt / spec.accel_noise_tau);
          ag.noise = ag.noise * decay + spec.accel_noise_sd * std::sqrt(1.0 - decay * decay) * rng.normal();
          acc += ag.noise;
        }
        if (spec.perturbation_rate > 0.0 && ag.brake_until < t && rng.bernoulli(spec.perturbation_rate * dt)) {
          ag.brake_until = t + spec.perturbation_duration;
        }
        if (spec.tailgate_rate > 0.0 && ag.tailgate_until < t && rng.bernoulli(spec.tailgate_rate * dt)) {
          ag.tailgate_until = t + spec.tailgate_duration;
          ag.tailgate_dv = rng.uniform(spec.tailgate_dv_min, spec.tailgate_dv_max);
          ag.tailgate_gap = rng.uniform(spec.tailgate_gap_min, spec.tailgate_gap_max);
        }
        if (ag.tailgate_until >= t && lead) {
          const double gap = lead->s.x - lead->s.length - ag.s.x;
          if (gap <= ag.tailgate_gap) {
            ag.tailgate_until = -1.0;
          } else {
            acc = std::clamp((lead->s.v + ag.tailgate_dv - ag.s.v) / 1.0, -3.0, ag.accel);
          }
        }
        if (ag.brake_until >= t) acc = std::min(acc, -spec.perturbation_decel);
        acc = std::clamp(acc, -9.0, ag.accel * 1.5);
        double v_new = std::max(0.0, ag.s.v + acc * dt);
        double x_new = ag.s.x + 0.5 * (ag.s.v + v_new) * dt;
        if (lead) {
          // lead has already moved (front-to-back order) unless scripted.
          const double lead_next_x = lead->scripted ? scripted_x(*lead, t + dt) : lead->s.x;
          const double limit = lead_next_x - lead->s.length - kMinSafetyGap;
          if (x_new > limit) {
            x_new = std::max(ag.s.x, limit);
            v_new = std::min(v_new, std::max(0.0, 2.0 * (x_new - ag.s.x) / dt - ag.s.v));
            v_new = std::min(v_new, lead->s.v);
          }
        }
        ag.s.a = (v_new - ag.s.v) / dt;
        ag.s.v = v_new;
        ag.s.x = x_new;
      }
    }
    // Exits: downstream boundary and off-ramps.
    for (auto & ag : agents) {
      if (!ag.alive || ag.scripted) continue;
      if (ag.s.x > geo.length) {
        ag.alive = false;
        continue;
      }
      if (ag.s.lane_id == 1 && spec.off_ramp_prob > 0.0) {
        for (double p : geo.off_ramp_positions) {
          const double prev_x = ag.s.x - ag.s.v * dt;
          if (prev_x < p && ag.s.x >= p && rng.bernoulli(spec.off_ramp_prob)) ag.alive = false;
        }
      }
    }
    // Keep the agent list from growing without bound.
    if (step % 256 == 0) {
      std::erase_if(agents, [](const detail::Agent & a) { return !a.alive && !a.scripted; });
    }
  }
  out.vehicles = next_id + std::accumulate(spec.platoons.begin(), spec.platoons.end(), std::size_t{0},
                                           [](std::size_t n, const auto & p) { return n + p.size; });
  out.sidecar = sidecar(spec);
  return out;
}

/// `t_s,expected_group_members,expected_pattern`; members are ';'-joined.
inline void write_sidecar(std::ostream & out, const std::vector<SidecarRow> & rows)
{
  out << "t_s,expected_group_members,expected_pattern\n";
  for (const auto & r : rows) {
    out << csv::fmt(r.t) << ',';
    for (std::size_t i = 0; i < r.members.size(); ++i) out << (i ? ";" : "") << r.members[i];
    out << ',' << r.pattern << '\n';
  }
}

}  // namespace groupwise::synth

#endif  // GROUPWISE__SYNTH_HPP_
