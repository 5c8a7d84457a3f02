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

#ifndef GROUPWISE__FEATURES_HPP_
#define GROUPWISE__FEATURES_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/grouping.hpp"
#include "groupwise/risk.hpp"
#include "groupwise/types.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace groupwise::features
{

inline constexpr const char * kModule = "features";

/// Group members within this many meters of a ramp gore count toward it.
inline constexpr double kRampRange = 100.0;

struct FormationRow
{
  double t = 0.0;
  std::size_t group_id = 0;

  double max_s = 0.0;
  double min_s = 0.0;
  double avg_s = 0.0;
  double std_s = 0.0;
  double std_a = 0.0;
  double pctg_large_veh = 0.0;
  double pctg_change_lane = 0.0;
  double size = 0.0;
  double risk = 0.0;
  double qty_high_risk = 0.0;
  double segment_density = 0.0;
  double segment_speed = 0.0;
  double lanes = 0.0;
  double on_ramp = 0.0;
  double off_ramp = 0.0;
  double curve = 0.0;

  int label = 0;  // is_high of the matched group one horizon later

  static const std::vector<std::string> & names()
  {
    static const std::vector<std::string> n = {
      "max_s", "min_s", "avg_s", "std_s", "std_a", "pctg_large_veh", "pctg_change_lane",
      "size", "risk", "qty_high_risk", "segment_density", "segment_speed", "lanes",
      "on_ramp", "off_ramp", "curve"};
    return n;
  }

  std::vector<double> values() const
  {
    return {max_s, min_s, avg_s, std_s, std_a, pctg_large_veh, pctg_change_lane, size, risk,
            qty_high_risk, segment_density, segment_speed, lanes, on_ramp, off_ramp, curve};
  }
};

struct PropagationRow
{
  std::size_t trajectory_id = 0;

  double std_avg_s = 0.0;
  double avg_avg_s = 0.0;
  double cum_avg_s = 0.0;
  double std_avg_a = 0.0;
  double std_size = 0.0;
  double avg_size = 0.0;
  double cum_size = 0.0;
  double avg_change_lane = 0.0;
  double sum_change_lane = 0.0;
  double sum_large_veh = 0.0;
  double sum_on_ramp = 0.0;
  double sum_off_ramp = 0.0;
  double timespan_high_risk = 0.0;
  double ini_risk = 0.0;
  double max_risk = 0.0;
  double avg_risk = 0.0;

  int label = 0;  // PropagationPattern

  static const std::vector<std::string> & names()
  {
    static const std::vector<std::string> n = {
      "std_avg_s", "avg_avg_s", "cum_avg_s", "std_avg_a", "std_size", "avg_size", "cum_size",
      "avg_change_lane", "sum_change_lane", "sum_large_veh", "sum_on_ramp", "sum_off_ramp",
      "timespan_high_risk", "ini_risk", "max_risk", "avg_risk"};
    return n;
  }

  std::vector<double> values() const
  {
    return {std_avg_s, avg_avg_s, cum_avg_s, std_avg_a, std_size, avg_size, cum_size,
            avg_change_lane, sum_change_lane, sum_large_veh, sum_on_ramp, sum_off_ramp,
            timespan_high_risk, ini_risk, max_risk, avg_risk};
  }
};

/// Per-member geometric context counts.
struct GeometryCounts
{
  std::size_t on_ramp = 0;
  std::size_t off_ramp = 0;
  std::size_t curve = 0;
};

inline bool near_any(double x, const std::vector<double> & positions)
{
  return std::any_of(positions.begin(), positions.end(),
                     [x](double p) { return std::abs(x - p) <= kRampRange; });
}

inline GeometryCounts geometry_counts(
  const grouping::VehicleGroup & g, const Frame & frame, const RoadGeometry & geo)
{
  GeometryCounts c;
  for (auto i : g.members) {
    const double x = frame.states[i].x;
    if (near_any(x, geo.on_ramp_positions)) ++c.on_ramp;
    if (near_any(x, geo.off_ramp_positions)) ++c.off_ramp;
    if (std::any_of(geo.curve_zones.begin(), geo.curve_zones.end(),
                    [x](const CurveZone & z) { return x >= z.start && x <= z.end; })) {
      ++c.curve;
    }
  }
  return c;
}

/// Group statistics at one frame; \p label is the risk state of the matched
/// group one prediction horizon later.
inline FormationRow formation_features(
  const grouping::VehicleGroup & g, const Frame & frame, const RoadGeometry & geo,
  const risk::GroupRisk & r, bool label)
{
  if (g.members.empty()) throw DataError(kModule, "empty group");
  std::vector<double> speeds;
  std::vector<double> accels;
  std::size_t large = 0;
  std::size_t changing = 0;
  for (auto i : g.members) {
    const auto & s = frame.states[i];
    speeds.push_back(s.v);
    accels.push_back(s.a);
    if (is_large(s.type)) ++large;
    if (s.lane_change) ++changing;
  }
  const double n = static_cast<double>(g.members.size());
  FormationRow row;
  row.t = frame.t;
  row.group_id = g.group_id;
  row.max_s = *std::max_element(speeds.begin(), speeds.end());
  row.min_s = *std::min_element(speeds.begin(), speeds.end());
  row.avg_s = stats::mean(speeds);
  row.std_s = stats::pop_std(speeds);
  row.std_a = stats::pop_std(accels);
  row.pctg_large_veh = static_cast<double>(large) / n;
  row.pctg_change_lane = static_cast<double>(changing) / n;
  row.size = n;
  row.risk = r.risk;
  row.qty_high_risk = static_cast<double>(r.qty_high_risk);
  row.segment_density = risk::frame_density(frame, geo);
  double vsum = 0.0;
  for (const auto & s : frame.states) vsum += s.v;
  row.segment_speed = frame.states.empty() ? 0.0 : vsum / static_cast<double>(frame.states.size());
  row.lanes = geo.lanes;
  const auto gc = geometry_counts(g, frame, geo);
  row.on_ramp = static_cast<double>(gc.on_ramp);
  row.off_ramp = static_cast<double>(gc.off_ramp);
  row.curve = static_cast<double>(gc.curve);
  row.label = label ? 1 : 0;
  return row;
}

/// One row per group whose matched successor chain reaches \p horizon_steps
/// frames ahead; other groups are dropped.
inline std::vector<FormationRow> formation_rows(
  const Dataset & ds, const grouping::GroupedDataset & gd,
  const std::vector<std::vector<risk::GroupRisk>> & risks, std::size_t horizon_steps = 1)
{
  std::vector<FormationRow> rows;
  for (std::size_t f = 0; f < gd.groups.size(); ++f) {
    for (std::size_t g = 0; g < gd.groups[f].size(); ++g) {
      std::size_t ff = f;
      std::size_t gg = g;
      bool reached = true;
      for (std::size_t h = 0; h < horizon_steps; ++h) {
        if (ff >= gd.successors.size() || !gd.successors[ff][gg]) {
          reached = false;
          break;
        }
        gg = *gd.successors[ff][gg];
        ++ff;
      }
      if (!reached) continue;
      rows.push_back(formation_features(
        gd.groups[f][g], ds.frames[f], ds.geometry, risks[f][g], risks[ff][gg].is_high));
    }
  }
  return rows;
}

/// Trajectory-level statistics over the per-frame series. cum_* is the
/// signed last-minus-first change; timespan_high_risk counts high-risk
/// frames times the sample interval.
inline PropagationRow propagation_features(
  const grouping::GroupTrajectory & tr, const Dataset & ds, const grouping::GroupedDataset & gd,
  const std::vector<std::vector<risk::GroupRisk>> & risks, bool strict_monotone = false)
{
  if (tr.length() < 2) throw DataError(kModule, "trajectory shorter than two frames");
  std::vector<double> avg_s;
  std::vector<double> avg_a;
  std::vector<double> size;
  std::vector<double> change;
  std::vector<double> risk_series;
  std::vector<std::size_t> q;
  PropagationRow row;
  std::size_t high = 0;
  for (const auto & step : tr.steps) {
    const auto & g = gd.at(step);
    const auto & frame = ds.frames[step.first];
    const auto & r = risks[step.first][step.second];
    double vs = 0.0;
    double as = 0.0;
    std::size_t lc = 0;
    for (auto i : g.members) {
      const auto & s = frame.states[i];
      vs += s.v;
      as += s.a;
      if (s.lane_change) ++lc;
      if (is_large(s.type)) row.sum_large_veh += 1.0;
    }
    const double n = static_cast<double>(g.size());
    avg_s.push_back(vs / n);
    avg_a.push_back(as / n);
    size.push_back(n);
    change.push_back(static_cast<double>(lc));
    risk_series.push_back(r.risk);
    q.push_back(r.qty_high_risk);
    if (r.is_high) ++high;
    const auto gc = geometry_counts(g, frame, ds.geometry);
    row.sum_on_ramp += static_cast<double>(gc.on_ramp);
    row.sum_off_ramp += static_cast<double>(gc.off_ramp);
  }
  row.std_avg_s = stats::pop_std(avg_s);
  row.avg_avg_s = stats::mean(avg_s);
  row.cum_avg_s = avg_s.back() - avg_s.front();
  row.std_avg_a = stats::pop_std(avg_a);
  row.std_size = stats::pop_std(size);
  row.avg_size = stats::mean(size);
  row.cum_size = size.back() - size.front();
  row.avg_change_lane = stats::mean(change);
  for (double c : change) row.sum_change_lane += c;
  row.timespan_high_risk = static_cast<double>(high) * ds.sample_interval;
  row.ini_risk = risk_series.front();
  row.max_risk = *std::max_element(risk_series.begin(), risk_series.end());
  row.avg_risk = stats::mean(risk_series);
  row.label = static_cast<int>(risk::classify_pattern(q, strict_monotone));
  return row;
}

inline std::vector<PropagationRow> propagation_rows(
  const Dataset & ds, const grouping::GroupedDataset & gd,
  const std::vector<std::vector<risk::GroupRisk>> & risks, bool strict_monotone = false)
{
  std::vector<PropagationRow> rows;
  for (std::size_t k = 0; k < gd.trajectories.size(); ++k) {
    auto row = propagation_features(gd.trajectories[k], ds, gd, risks, strict_monotone);
    row.trajectory_id = k;
    rows.push_back(row);
  }
  return rows;
}

/// Column-named numeric table with an integer label, the input to modeling.
struct FeatureTable
{
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
};

template <typename Row>
FeatureTable to_table(const std::vector<Row> & rows)
{
  FeatureTable t;
  t.names = Row::names();
  for (const auto & r : rows) {
    t.rows.push_back(r.values());
    t.labels.push_back(r.label);
  }
  return t;
}

inline void write_formation(std::ostream & out, const std::vector<FormationRow> & rows)
{
  out << "t_s,group_id";
  for (const auto & n : FormationRow::names()) out << ',' << n;
  out << ",label\n";
  for (const auto & r : rows) {
    out << csv::fmt(r.t) << ',' << r.group_id;
    for (double v : r.values()) out << ',' << csv::fmt(v);
    out << ',' << r.label << '\n';
  }
}

inline void write_propagation(std::ostream & out, const std::vector<PropagationRow> & rows)
{
  out << "trajectory_id";
  for (const auto & n : PropagationRow::names()) out << ',' << n;
  out << ",label\n";
  for (const auto & r : rows) {
    out << r.trajectory_id;
    for (double v : r.values()) out << ',' << csv::fmt(v);
    out << ',' << r.label << '\n';
  }
}

/// Reads either feature CSV back. Identifier columns are skipped;
/// `num_off_ramp` and `num_large_veh` are accepted for their `sum_` names.
inline FeatureTable read_feature_table(std::istream & in)
{
  const auto raw = csv::read_table(in, kModule);
  const auto label_col = raw.column("label");
  if (!label_col) throw DataError(kModule, "feature table lacks a label column");
  FeatureTable t;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < raw.header.size(); ++c) {
    const auto & h = raw.header[c];
    if (c == *label_col || h == "t_s" || h == "group_id" || h == "trajectory_id") continue;
    cols.push_back(c);
    if (h == "num_off_ramp") {
      t.names.push_back("sum_off_ramp");
    } else if (h == "num_large_veh") {
      t.names.push_back("sum_large_veh");
    } else {
      t.names.push_back(h);
    }
  }
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    std::vector<double> vals;
    for (auto c : cols) {
      const auto v = csv::parse_double(raw.rows[r][c]);
      if (!v) {
        throw DataError(kModule, "unparseable value in column " + raw.header[c] + ", row " +
                                   std::to_string(r + 2));
      }
      vals.push_back(*v);
    }
    const auto lab = csv::parse_int(raw.rows[r][*label_col]);
    if (!lab) throw DataError(kModule, "unparseable label, row " + std::to_string(r + 2));
    t.rows.push_back(std::move(vals));
    t.labels.push_back(static_cast<int>(*lab));
  }
  return t;
}

}  // namespace groupwise::features

#endif  // GROUPWISE__FEATURES_HPP_
