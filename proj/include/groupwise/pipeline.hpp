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

#ifndef GROUPWISE__PIPELINE_HPP_
#define GROUPWISE__PIPELINE_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/features.hpp"
#include "groupwise/grouping.hpp"
#include "groupwise/ingest.hpp"
#include "groupwise/modeling/models.hpp"
#include "groupwise/modeling/report.hpp"
#include "groupwise/risk.hpp"
#include "groupwise/ssm.hpp"
#include "groupwise/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace groupwise::pipeline
{

inline constexpr const char * kModule = "cli";

enum class ThresholdMode { static_, adaptive };

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::adaptive ? "adaptive" : "static"; }

inline ThresholdMode parse_threshold_mode(const std::string & s)
{
  if (s == "static") return ThresholdMode::static_;
  if (s == "adaptive") return ThresholdMode::adaptive;
  throw UsageError(kModule, "threshold mode must be 'static' or 'adaptive', got '" + s + "'");
}

struct RunConfig
{
  std::string input;     // raw or sampled trajectory CSV
  std::string geometry;  // geometry file
  std::string out_dir = "out";
  std::vector<double> intervals = {5.0, 2.0, 1.0};
  ThresholdMode mode = ThresholdMode::static_;
  grouping::FrameThresholds thresholds;
  ssm::AdverseParams adverse;
  grouping::PairPolicy pairs;
  std::optional<double> clamp_percentile;  // recompute the projection clamp from the data
  bool strict_monotone = false;
  modeling::ModelConfig model;
  bool fit_formation = true;
  bool fit_propagation = true;
  bool equalize = true;
  unsigned jobs = 1;
};

/// Everything a run depends on, for the report echo. The output directory is
/// left out: it names where results go, not what they are.
inline nlohmann::json config_echo(const RunConfig & c)
{
  nlohmann::json j;
  j["input"] = c.input;
  j["geometry"] = c.geometry;
  j["intervals"] = c.intervals;
  j["thresholds"] = to_string(c.mode);
  j["ttc_in"] = c.thresholds.ttc_in;
  j["ttc_cross"] = c.thresholds.ttc_cross;
  j["high_risk_ttc"] = c.thresholds.high_risk_ttc;
  j["adverse_decel"] = c.adverse.decel;
  j["adverse_duration"] = c.adverse.duration;
  j["ttc_clamp"] = c.pairs.clamp;
  j["clamp_all_pairs"] = c.pairs.clamp_all_pairs;
  j["clamp_percentile"] = c.clamp_percentile ? nlohmann::json(*c.clamp_percentile) : nlohmann::json();
  j["strict_monotone"] = c.strict_monotone;
  const auto & p = c.model.preprocess;
  j["winsor_low"] = p.winsor_low;
  j["winsor_high"] = p.winsor_high;
  j["downsample_ratio"] = p.downsample_ratio;
  j["train_fraction"] = p.train_fraction;
  j["discretize_bins"] = p.discretize_bins;
  j["min_class_rows"] = p.min_class_rows;
  j["seed"] = p.seed;
  j["significance"] = c.model.protocol.significance;
  j["correlation"] = c.model.protocol.correlation;
  j["vif"] = c.model.protocol.vif;
  j["select"] = c.model.select;
  j["threshold"] = c.model.threshold;
  j["equalize"] = c.equalize;
  return j;
}

inline std::string interval_tag(double interval) { return csv::fmt(interval) + "s"; }

/// One interval's worth of pipeline state.
struct IntervalResult
{
  double interval = 0.0;
  Dataset dataset;
  grouping::GroupedDataset grouped;
  std::vector<std::vector<risk::GroupRisk>> risks;
  std::vector<risk::PropagationPattern> patterns;
  std::vector<features::FormationRow> formation;
  std::vector<features::PropagationRow> propagation;
  std::optional<risk::AdaptiveThresholdMap> threshold_map;
  std::optional<risk::SizeSummary> static_sizes;
  std::optional<risk::SizeSummary> adaptive_sizes;
};

inline grouping::GroupingOptions grouping_options(const RunConfig & c)
{
  return {c.adverse, c.pairs, c.jobs};
}

/// Sampling, grouping, risk, patterns and features at one interval.
inline IntervalResult run_interval(
  std::span<const Frame> raw, const RoadGeometry & geo, double interval, const RunConfig & c)
{
  IntervalResult r;
  r.interval = interval;
  r.dataset = ingest::downsample(raw, interval, geo);
  auto opt = grouping_options(c);
  if (c.clamp_percentile) opt.pairs.clamp = risk::pair_ttc_percentile(r.dataset, *c.clamp_percentile);
  if (c.mode == ThresholdMode::adaptive) {
    r.threshold_map = risk::build_adaptive_thresholds(r.dataset);
    r.grouped = grouping::build_trajectories(
      r.dataset, risk::adaptive_threshold_fn(*r.threshold_map, geo), opt);
    r.adaptive_sizes = risk::size_summary(r.grouped);
    r.static_sizes = risk::size_summary(
      grouping::build_trajectories(r.dataset, grouping::static_thresholds(c.thresholds), opt));
  } else {
    r.grouped = grouping::build_trajectories(r.dataset, grouping::static_thresholds(c.thresholds), opt);
    r.static_sizes = risk::size_summary(r.grouped);
  }
  r.risks = risk::all_risks(r.grouped);
  r.patterns = risk::classify_all(r.grouped, r.risks, c.strict_monotone);
  r.formation = features::formation_rows(r.dataset, r.grouped, r.risks);
  r.propagation = features::propagation_rows(r.dataset, r.grouped, r.risks, c.strict_monotone);
  return r;
}

/// Rows left after majority down-sampling, mirroring the preprocessing rule.
inline std::size_t downsampled_rows(const std::vector<int> & labels, double ratio)
{
  std::size_t n0 = 0, n1 = 0;
  for (int y : labels) (y == 1 ? n1 : n0) += 1;
  if (ratio > 0.0) {
    n0 = std::min(n0, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n1))));
  }
  return n0 + n1;
}

/// `t_s,group_id,size,risk,is_high,qty_high_risk`
inline void write_group_risk(std::ostream & out, const IntervalResult & r)
{
  out << "t_s,group_id,size,risk,is_high,qty_high_risk\n";
  for (std::size_t f = 0; f < r.grouped.groups.size(); ++f) {
    for (std::size_t g = 0; g < r.grouped.groups[f].size(); ++g) {
      const auto & grp = r.grouped.groups[f][g];
      const auto & k = r.risks[f][g];
      out << csv::fmt(r.dataset.frames[f].t) << ',' << grp.group_id << ',' << grp.size() << ','
          << csv::fmt(k.risk) << ',' << (k.is_high ? 1 : 0) << ',' << k.qty_high_risk << '\n';
    }
  }
}

/// `trajectory_id,length,q_series,pattern`
inline void write_patterns(std::ostream & out, const IntervalResult & r)
{
  out << "trajectory_id,length,q_series,pattern\n";
  for (std::size_t k = 0; k < r.grouped.trajectories.size(); ++k) {
    const auto q = risk::quantity_series(r.grouped.trajectories[k], r.risks);
    out << k << ',' << q.size() << ',';
    for (std::size_t i = 0; i < q.size(); ++i) out << (i ? ";" : "") << q[i];
    out << ',' << risk::to_string(r.patterns[k]) << '\n';
  }
}

/// `interval_s,pattern,count,share`
inline void write_pattern_distribution(std::ostream & out, const std::vector<IntervalResult> & rs)
{
  out << "interval_s,pattern,count,share\n";
  for (const auto & r : rs) {
    const auto n = risk::pattern_distribution(r.patterns);
    const double total = static_cast<double>(r.patterns.size());
    for (std::size_t p = 0; p < n.size(); ++p) {
      out << csv::fmt(r.interval) << ',' << risk::kPatternNames[p] << ',' << n[p] << ','
          << csv::fixed(total > 0 ? static_cast<double>(n[p]) / total : 0.0, 4) << '\n';
    }
  }
}

/// Group-size comparison between threshold modes: CSV plus a text table.
inline void write_size_comparison(std::ostream & csv_out, std::ostream & txt, const std::vector<IntervalResult> & rs)
{
  csv_out << "interval_s,mode,groups,max_size,std_size,mean_size\n";
  txt << "Comparison of vehicle-group sizes\n";
  txt << modeling::pad("interval", 10, false) << modeling::pad("mode", 10, false)
      << modeling::pad("groups", 9) << modeling::pad("max", 6) << modeling::pad("std", 8)
      << modeling::pad("mean", 8) << '\n';
  for (const auto & r : rs) {
    for (auto [mode, s] : {std::pair{"static", r.static_sizes}, std::pair{"adaptive", r.adaptive_sizes}}) {
      if (!s) continue;
      csv_out << csv::fmt(r.interval) << ',' << mode << ',' << s->groups << ',' << s->max << ','
              << csv::fixed(s->std, 4) << ',' << csv::fixed(s->mean, 4) << '\n';
      txt << modeling::pad(interval_tag(r.interval), 10, false) << modeling::pad(mode, 10, false)
          << modeling::pad(std::to_string(s->groups), 9) << modeling::pad(std::to_string(s->max), 6)
          << modeling::pad(csv::fixed(s->std, 3), 8) << modeling::pad(csv::fixed(s->mean, 3), 8) << '\n';
    }
  }
}

/// Tracks every file and directory a run creates so a failed run can be
/// rolled back.
class ArtifactSet
{
public:
  explicit ArtifactSet(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path dir(const std::filesystem::path & rel)
  {
    const auto p = root_ / rel;
    std::vector<std::filesystem::path> fresh;
    for (auto q = p; !q.empty() && !std::filesystem::exists(q); q = q.parent_path()) {
      fresh.push_back(q);
      if (q == q.parent_path()) break;
    }
    std::filesystem::create_directories(p);
    dirs_.insert(dirs_.end(), fresh.begin(), fresh.end());
    return p;
  }

  template <class Fn>
  void write(const std::filesystem::path & rel, Fn && fn)
  {
    const auto p = root_ / rel;
    dir(rel.parent_path());
    files_.push_back(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError(kModule, "cannot write " + p.string());
    fn(out);
    if (!out) throw DataError(kModule, "write failed for " + p.string());
  }

  void rollback() noexcept
  {
    std::error_code ec;
    for (const auto & f : files_) std::filesystem::remove(f, ec);
    // Deepest first; only directories this run created, and only if empty.
    std::sort(dirs_.begin(), dirs_.end(), [](const auto & a, const auto & b) {
      return a.string().size() > b.string().size();
    });
    for (const auto & d : dirs_) std::filesystem::remove(d, ec);
    files_.clear();
    dirs_.clear();
  }

  const std::vector<std::filesystem::path> & files() const { return files_; }

private:
  std::filesystem::path root_;
  std::vector<std::filesystem::path> files_;
  std::vector<std::filesystem::path> dirs_;
};

struct ModelOutcome
{
  double interval = 0.0;
  modeling::ModelRun run;
};

struct RunSummary
{
  std::vector<IntervalResult> intervals;
  std::vector<ModelOutcome> formation;
  std::optional<modeling::ModelRun> propagation;
  double propagation_interval = 0.0;
  std::vector<std::filesystem::path> files;
};

inline void validate(const RunConfig & c)
{
  if (c.intervals.empty()) throw UsageError(kModule, "at least one sample interval is required");
  for (double i : c.intervals) {
    if (!(i > 0.0)) throw UsageError(kModule, "sample intervals must be positive");
  }
  std::vector<double> sorted = c.intervals;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw UsageError(kModule, "duplicate sample interval");
  }
  c.adverse.validate();
  if (!(c.thresholds.ttc_in > 0.0) || !(c.thresholds.ttc_cross > 0.0) || !(c.thresholds.high_risk_ttc > 0.0)) {
    throw UsageError(kModule, "TTC thresholds must be positive");
  }
  if (c.clamp_percentile && !(*c.clamp_percentile > 0.0 && *c.clamp_percentile <= 100.0)) {
    throw UsageError(kModule, "clamp percentile must be in (0, 100]");
  }
}

/// Runs every stage over \p raw and writes all artifacts under
/// `c.out_dir`. On any error the files written so far are removed and the
/// error is rethrown.
inline RunSummary run_pipeline(const RunConfig & c, std::span<const Frame> raw, const RoadGeometry & geo)
{
  validate(c);
  ArtifactSet art(c.out_dir);
  RunSummary sum;
  try {
    const auto echo = config_echo(c);
    for (double interval : c.intervals) {
      auto r = run_interval(raw, geo, interval, c);
      const std::filesystem::path d = "interval_" + interval_tag(interval);
      art.write(d / "frames.csv", [&](std::ostream & o) { ingest::write_trajectories(o, r.dataset.frames); });
      art.write(d / "groups.csv", [&](std::ostream & o) { grouping::write_groups(o, r.dataset, r.grouped); });
      art.write(d / "trajectories.csv",
                [&](std::ostream & o) { grouping::write_trajectories(o, r.dataset, r.grouped); });
      art.write(d / "group_risk.csv", [&](std::ostream & o) { write_group_risk(o, r); });
      art.write(d / "patterns.csv", [&](std::ostream & o) { write_patterns(o, r); });
      art.write(d / "formation.csv", [&](std::ostream & o) { features::write_formation(o, r.formation); });
      art.write(d / "propagation.csv",
                [&](std::ostream & o) { features::write_propagation(o, r.propagation); });
      if (r.threshold_map) {
        art.write(d / "threshold_map.csv",
                  [&](std::ostream & o) { risk::write_threshold_map(o, *r.threshold_map); });
      }
      sum.intervals.push_back(std::move(r));
    }
    art.write("pattern_distribution.csv",
              [&](std::ostream & o) { write_pattern_distribution(o, sum.intervals); });
    {
      std::ostringstream csv_out, txt;
      write_size_comparison(csv_out, txt, sum.intervals);
      art.write("group_size_comparison.csv", [&](std::ostream & o) { o << csv_out.str(); });
      art.write("group_size_comparison.txt", [&](std::ostream & o) { o << txt.str(); });
    }

    if (c.fit_formation) {
      std::vector<features::FeatureTable> tables;
      std::size_t smallest = std::numeric_limits<std::size_t>::max();
      for (const auto & r : sum.intervals) {
        tables.push_back(features::to_table(r.formation));
        smallest = std::min(smallest, downsampled_rows(tables.back().labels, c.model.preprocess.downsample_ratio));
      }
      for (std::size_t k = 0; k < sum.intervals.size(); ++k) {
        auto mc = c.model;
        if (c.equalize && sum.intervals.size() > 1) mc.preprocess.max_rows = smallest;
        auto run = modeling::fit_formation_model(tables[k], mc);
        const auto tag = interval_tag(sum.intervals[k].interval);
        auto echo_k = echo;
        echo_k["interval"] = sum.intervals[k].interval;
        echo_k["equalized_rows"] = mc.preprocess.max_rows ? nlohmann::json(*mc.preprocess.max_rows) : nlohmann::json();
        art.write("formation_" + tag + ".txt", [&](std::ostream & o) {
          modeling::write_text_report(o, "Group formation model, interval " + tag, run);
        });
        art.write("formation_" + tag + ".json", [&](std::ostream & o) {
          o << modeling::report_json(run, "formation", echo_k).dump(2) << '\n';
        });
        sum.formation.push_back({sum.intervals[k].interval, std::move(run)});
      }
    }
    if (c.fit_propagation) {
      // The coarsest interval gives the longest-spanning trajectories.
      const auto it = std::max_element(sum.intervals.begin(), sum.intervals.end(),
                                       [](const auto & a, const auto & b) { return a.interval < b.interval; });
      auto run = modeling::fit_propagation_model(features::to_table(it->propagation), c.model);
      sum.propagation_interval = it->interval;
      auto echo_p = echo;
      echo_p["interval"] = it->interval;
      art.write("propagation.txt", [&](std::ostream & o) {
        modeling::write_text_report(o, "Risk propagation model, interval " + interval_tag(it->interval), run);
      });
      art.write("propagation.json", [&](std::ostream & o) {
        o << modeling::report_json(run, "propagation", echo_p).dump(2) << '\n';
      });
      sum.propagation = std::move(run);
    }
    nlohmann::json s;
    s["config"] = echo;
    nlohmann::json iv = nlohmann::json::array();
    for (std::size_t k = 0; k < sum.intervals.size(); ++k) {
      const auto & r = sum.intervals[k];
      std::size_t ngroups = 0;
      for (const auto & fg : r.grouped.groups) ngroups += fg.size();
      nlohmann::json e = {{"interval", r.interval},
                          {"frames", r.dataset.frames.size()},
                          {"groups", ngroups},
                          {"trajectories", r.grouped.trajectories.size()},
                          {"formation_rows", r.formation.size()}};
      for (const auto & m : sum.formation) {
        if (m.interval == r.interval && m.run.fit.validation) {
          e["formation_validation_auc"] = modeling::num(m.run.fit.validation->auc);
        }
      }
      iv.push_back(std::move(e));
    }
    s["intervals"] = std::move(iv);
    if (sum.propagation && sum.propagation->fit.validation_accuracy) {
      s["propagation_validation_acc"] = *sum.propagation->fit.validation_accuracy;
    }
    art.write("summary.json", [&](std::ostream & o) { o << s.dump(2) << '\n'; });
  } catch (...) {
    art.rollback();
    throw;
  }
  sum.files = art.files();
  return sum;
}

}  // namespace groupwise::pipeline

#endif  // GROUPWISE__PIPELINE_HPP_
