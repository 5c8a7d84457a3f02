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

// groupwise: command-line front end. Each subcommand runs one stage on the
// artifacts of the previous one; `analyze` chains them all.

#include "groupwise/groupwise.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace groupwise;

namespace
{

struct Cli
{
  pipeline::RunConfig run;
  std::string mode = "static";
  std::optional<double> interval;
  std::string groups_dir;
  std::string features_path;
  std::string spec_path;
  std::string scenario;
  std::string out;
  bool no_select = false;
  bool no_equalize = false;
  bool skip_propagation = false;
  bool skip_formation = false;
  std::optional<std::size_t> max_rows;
};

void require_file(const std::string & path, const std::string & what, const std::string & producer)
{
  if (path.empty()) throw UsageError("cli", what + " path is required");
  if (!fs::exists(path)) {
    throw UsageError("cli", what + " '" + path + "' not found" +
                              (producer.empty() ? "" : "; produce it with `groupwise " + producer + "`"));
  }
}

void add_input(CLI::App * s, Cli & c, bool with_interval = true)
{
  s->add_option("--in", c.run.input, "trajectory CSV (raw or sampled)");
  s->add_option("--geometry", c.run.geometry, "road geometry file");
  if (with_interval) s->add_option("--interval", c.interval, "sample interval, s (default: the file's own spacing)");
}

void add_grouping(CLI::App * s, Cli & c)
{
  auto & r = c.run;
  s->add_option("--thresholds", c.mode, "static | adaptive")->capture_default_str();
  s->add_option("--ttc-in", r.thresholds.ttc_in, "in-lane adverse-TTC link threshold, s")->capture_default_str();
  s->add_option("--ttc-cross", r.thresholds.ttc_cross, "cross-lane projected-TTC threshold, s")->capture_default_str();
  s->add_option("--high-risk-ttc", r.thresholds.high_risk_ttc, "pair TTC counted as high risk, s")->capture_default_str();
  s->add_option("--adverse-decel", r.adverse.decel, "leader braking for adverse TTC, m/s^2")->capture_default_str();
  s->add_option("--adverse-duration", r.adverse.duration, "braking duration for adverse TTC, s")->capture_default_str();
  s->add_option("--ttc-clamp", r.pairs.clamp, "TTC assigned to overlapping projection pairs, s")->capture_default_str();
  s->add_option("--clamp-percentile", r.clamp_percentile, "recompute the clamp as this percentile of pair TTCs");
  s->add_flag("--clamp-all-pairs", r.pairs.clamp_all_pairs, "clamp overlapping in-lane pairs too");
  s->add_flag("--strict-monotone", r.strict_monotone, "strictly monotone Q sequences for diffusion/dissipation");
  s->add_option("--jobs", r.jobs, "worker threads")->capture_default_str();
}

void add_model(CLI::App * s, Cli & c)
{
  auto & p = c.run.model.preprocess;
  auto & q = c.run.model.protocol;
  s->add_option("--seed", p.seed, "seed for sampling and splitting (GROUPWISE_SEED overrides)")->capture_default_str();
  s->add_option("--winsor-low", p.winsor_low, "lower winsorizing percentile")->capture_default_str();
  s->add_option("--winsor-high", p.winsor_high, "upper winsorizing percentile")->capture_default_str();
  s->add_option("--downsample-ratio", p.downsample_ratio, "non-cases kept per case (0: off)")->capture_default_str();
  s->add_option("--train-fraction", p.train_fraction, "training share of the split")->capture_default_str();
  s->add_option("--discretize-bins", p.discretize_bins, "equal-frequency bins (0: off)")->capture_default_str();
  s->add_option("--min-class-rows", p.min_class_rows, "minimum rows per class")->capture_default_str();
  s->add_option("--max-rows", c.max_rows, "stratified cap on rows after down-sampling");
  s->add_option("--significance", q.significance, "univariate screening p-value cut")->capture_default_str();
  s->add_option("--correlation", q.correlation, "|r| above which one of a pair is dropped")->capture_default_str();
  s->add_option("--vif", q.vif, "VIF limit")->capture_default_str();
  s->add_option("--threshold", c.run.model.threshold, "probability cut for TPR/TNR/ACC")->capture_default_str();
  s->add_flag("--no-select", c.no_select, "fit all variables without selection");
}

void finalize(Cli & c)
{
  c.run.mode = pipeline::parse_threshold_mode(c.mode);
  c.run.model.select = !c.no_select;
  c.run.model.preprocess.max_rows = c.max_rows;
  c.run.fit_formation = !c.skip_formation;
  c.run.fit_propagation = !c.skip_propagation;
  c.run.equalize = !c.no_equalize;
  if (c.run.jobs == 0) throw UsageError("cli", "--jobs must be at least 1");
  if (const char * env = std::getenv("GROUPWISE_SEED"); env && *env) {
    const auto v = csv::parse_int(env);
    if (!v || *v < 0) throw UsageError("cli", "GROUPWISE_SEED must be a non-negative integer");
    c.run.model.preprocess.seed = static_cast<std::uint64_t>(*v);
  }
}

Dataset load_dataset(const Cli & c)
{
  require_file(c.run.input, "trajectory file", "synth");
  require_file(c.run.geometry, "geometry file", "");
  const auto geo = ingest::load_geometry(c.run.geometry);
  const auto frames = ingest::load_trajectories(c.run.input, geo);
  if (frames.empty()) throw DataError("data-ingest", "trajectory file has no rows");
  const double interval = c.interval ? *c.interval : ingest::raw_interval(frames, 1.0);
  return ingest::downsample(frames, interval, geo);
}

grouping::ThresholdFn thresholds_for(const Cli & c, const Dataset & ds,
                                     std::optional<risk::AdaptiveThresholdMap> * map = nullptr)
{
  if (c.run.mode == pipeline::ThresholdMode::static_) return grouping::static_thresholds(c.run.thresholds);
  auto m = risk::build_adaptive_thresholds(ds);
  if (map) *map = m;
  return risk::adaptive_threshold_fn(std::move(m), ds.geometry);
}

grouping::GroupingOptions grouping_options(const Cli & c, const Dataset & ds)
{
  auto opt = pipeline::grouping_options(c.run);
  if (c.run.clamp_percentile) opt.pairs.clamp = risk::pair_ttc_percentile(ds, *c.run.clamp_percentile);
  return opt;
}

/// Groups from a previous `group` run, with per-frame thresholds restored.
grouping::GroupedDataset load_grouped(const Cli & c, const Dataset & ds)
{
  const auto gpath = fs::path(c.groups_dir) / "groups.csv";
  const auto tpath = fs::path(c.groups_dir) / "trajectories.csv";
  require_file(gpath.string(), "groups dump", "group");
  require_file(tpath.string(), "group-trajectory table", "group");
  std::ifstream gin(gpath), tin(tpath);
  const auto gt = csv::read_table(gin, "grouping");
  const auto tt = csv::read_table(tin, "grouping");
  auto gd = grouping::read_grouped(gt, tt, ds, grouping_options(c, ds).pairs);
  const auto fn = thresholds_for(c, ds);
  for (std::size_t f = 0; f < ds.frames.size(); ++f) gd.thresholds[f] = fn(ds.frames[f]);
  return gd;
}

int cmd_ingest(Cli & c)
{
  const auto ds = load_dataset(c);
  pipeline::ArtifactSet art(c.out.empty() ? "." : fs::path(c.out).parent_path());
  if (c.out.empty()) {
    ingest::write_trajectories(std::cout, ds.frames);
    return 0;
  }
  try {
    art.write(fs::path(c.out).filename(), [&](std::ostream & o) { ingest::write_trajectories(o, ds.frames); });
  } catch (...) {
    art.rollback();
    throw;
  }
  std::cerr << "wrote " << ds.frames.size() << " frames at " << csv::fmt(ds.sample_interval) << " s to " << c.out
            << '\n';
  return 0;
}

int cmd_group(Cli & c)
{
  const auto ds = load_dataset(c);
  std::optional<risk::AdaptiveThresholdMap> map;
  const auto fn = thresholds_for(c, ds, &map);
  const auto gd = grouping::build_trajectories(ds, fn, grouping_options(c, ds));
  pipeline::ArtifactSet art(c.out);
  try {
    art.write("groups.csv", [&](std::ostream & o) { grouping::write_groups(o, ds, gd); });
    art.write("trajectories.csv", [&](std::ostream & o) { grouping::write_trajectories(o, ds, gd); });
    if (map) art.write("threshold_map.csv", [&](std::ostream & o) { risk::write_threshold_map(o, *map); });
  } catch (...) {
    art.rollback();
    throw;
  }
  std::size_t n = 0;
  for (const auto & fg : gd.groups) n += fg.size();
  std::cerr << n << " groups, " << gd.trajectories.size() << " trajectories -> " << c.out << '\n';
  return 0;
}

int cmd_risk(Cli & c)
{
  const auto ds = load_dataset(c);
  pipeline::IntervalResult r;
  r.interval = ds.sample_interval;
  r.dataset = ds;
  r.grouped = load_grouped(c, ds);
  r.risks = risk::all_risks(r.grouped);
  r.patterns = risk::classify_all(r.grouped, r.risks, c.run.strict_monotone);
  pipeline::ArtifactSet art(c.out);
  try {
    art.write("group_risk.csv", [&](std::ostream & o) { pipeline::write_group_risk(o, r); });
    art.write("patterns.csv", [&](std::ostream & o) { pipeline::write_patterns(o, r); });
    art.write("pattern_distribution.csv", [&](std::ostream & o) {
      pipeline::write_pattern_distribution(o, std::vector<pipeline::IntervalResult>{r});
    });
  } catch (...) {
    art.rollback();
    throw;
  }
  return 0;
}

int cmd_features(Cli & c)
{
  const auto ds = load_dataset(c);
  const auto gd = load_grouped(c, ds);
  const auto risks = risk::all_risks(gd);
  const auto form = features::formation_rows(ds, gd, risks);
  const auto prop = features::propagation_rows(ds, gd, risks, c.run.strict_monotone);
  pipeline::ArtifactSet art(c.out);
  try {
    art.write("formation.csv", [&](std::ostream & o) { features::write_formation(o, form); });
    art.write("propagation.csv", [&](std::ostream & o) { features::write_propagation(o, prop); });
  } catch (...) {
    art.rollback();
    throw;
  }
  std::cerr << form.size() << " formation rows, " << prop.size() << " propagation rows -> " << c.out << '\n';
  return 0;
}

int cmd_fit(Cli & c, bool formation)
{
  require_file(c.features_path, "feature table", "features");
  std::ifstream in(c.features_path);
  const auto table = features::read_feature_table(in);
  const auto run = formation ? modeling::fit_formation_model(table, c.run.model)
                             : modeling::fit_propagation_model(table, c.run.model);
  auto echo = pipeline::config_echo(c.run);
  echo["features"] = c.features_path;
  const std::string title = formation ? "Group formation model" : "Risk propagation model";
  modeling::write_text_report(std::cout, title, run);
  if (!c.out.empty()) {
    const fs::path prefix(c.out);
    pipeline::ArtifactSet art(prefix.parent_path().empty() ? fs::path(".") : prefix.parent_path());
    try {
      art.write(prefix.filename().string() + ".txt",
                [&](std::ostream & o) { modeling::write_text_report(o, title, run); });
      art.write(prefix.filename().string() + ".json", [&](std::ostream & o) {
        o << modeling::report_json(run, formation ? "formation" : "propagation", echo).dump(2) << '\n';
      });
    } catch (...) {
      art.rollback();
      throw;
    }
  }
  return 0;
}

int cmd_adaptive(Cli & c)
{
  const auto ds = load_dataset(c);
  pipeline::IntervalResult r;
  r.interval = ds.sample_interval;
  r.threshold_map = risk::build_adaptive_thresholds(ds);
  const auto opt = grouping_options(c, ds);
  r.adaptive_sizes = risk::size_summary(
    grouping::build_trajectories(ds, risk::adaptive_threshold_fn(*r.threshold_map, ds.geometry), opt));
  r.static_sizes =
    risk::size_summary(grouping::build_trajectories(ds, grouping::static_thresholds(c.run.thresholds), opt));
  pipeline::ArtifactSet art(c.out);
  try {
    art.write("threshold_map.csv", [&](std::ostream & o) { risk::write_threshold_map(o, *r.threshold_map); });
    std::ostringstream csv_out, txt;
    pipeline::write_size_comparison(csv_out, txt, std::vector<pipeline::IntervalResult>{r});
    art.write("group_size_comparison.csv", [&](std::ostream & o) { o << csv_out.str(); });
    art.write("group_size_comparison.txt", [&](std::ostream & o) { o << txt.str(); });
    std::cout << txt.str();
  } catch (...) {
    art.rollback();
    throw;
  }
  return 0;
}

synth::ScenarioSpec load_scenario(const std::string & path)
{
  require_file(path, "scenario spec", "");
  std::ifstream in(path);
  auto spec = synth::parse_scenario(in);
  if (const char * env = std::getenv("GROUPWISE_SEED"); env && *env) {
    const auto v = csv::parse_int(env);
    if (!v || *v < 0) throw UsageError("cli", "GROUPWISE_SEED must be a non-negative integer");
    spec.seed = static_cast<std::uint64_t>(*v);
  }
  return spec;
}

int cmd_synth(Cli & c)
{
  const auto spec = load_scenario(c.spec_path);
  const auto out = synth::generate(spec);
  pipeline::ArtifactSet art(c.out);
  try {
    art.write("trajectories.csv", [&](std::ostream & o) { ingest::write_trajectories(o, out.frames, false); });
    art.write("sidecar.csv", [&](std::ostream & o) { synth::write_sidecar(o, out.sidecar); });
    art.write("geometry.cfg", [&](std::ostream & o) { ingest::write_geometry(o, out.geometry); });
  } catch (...) {
    art.rollback();
    throw;
  }
  std::cerr << out.vehicles << " vehicles, " << out.frames.size() << " raw frames -> " << c.out << '\n';
  return 0;
}

int cmd_analyze(Cli & c)
{
  std::vector<Frame> raw;
  RoadGeometry geo;
  if (!c.scenario.empty()) {
    const auto spec = load_scenario(c.scenario);
    auto out = synth::generate(spec);
    raw = std::move(out.frames);
    geo = out.geometry;
    if (c.run.input.empty()) c.run.input = "scenario:" + c.scenario;
    if (c.run.geometry.empty()) c.run.geometry = "scenario:" + c.scenario;
  } else {
    require_file(c.run.input, "trajectory file", "synth");
    require_file(c.run.geometry, "geometry file", "");
    geo = ingest::load_geometry(c.run.geometry);
    raw = ingest::load_trajectories(c.run.input, geo);
  }
  if (raw.empty()) throw DataError("data-ingest", "trajectory input has no rows");
  const auto sum = pipeline::run_pipeline(c.run, raw, geo);
  for (const auto & m : sum.formation) {
    std::cout << "formation " << pipeline::interval_tag(m.interval) << ": n_train=" << m.run.n_train
              << " n_valid=" << m.run.n_valid;
    if (m.run.fit.validation) std::cout << " validation AUC=" << csv::fixed(m.run.fit.validation->auc, 3);
    std::cout << '\n';
  }
  if (sum.propagation && sum.propagation->fit.validation_accuracy) {
    std::cout << "propagation " << pipeline::interval_tag(sum.propagation_interval)
              << ": validation ACC=" << csv::fixed(*sum.propagation->fit.validation_accuracy, 3) << '\n';
  }
  std::cout << sum.files.size() << " artifacts in " << c.run.out_dir << '\n';
  return 0;
}

int report(const Error & e, int code)
{
  std::cerr << "groupwise: " << e.module() << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Vehicle-group crash-risk analysis"};
  app.set_config("--config", "", "INI/TOML config; options go under a [subcommand] section");
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", "groupwise 0.1.0");

  Cli c;
  auto * ingest_cmd = app.add_subcommand("ingest", "validate and down-sample a trajectory CSV");
  add_input(ingest_cmd, c);
  ingest_cmd->add_option("--out", c.out, "output CSV (default: stdout)");

  auto * group_cmd = app.add_subcommand("group", "segment frames into groups and match them over time");
  add_input(group_cmd, c);
  add_grouping(group_cmd, c);
  group_cmd->add_option("--out", c.out, "output directory")->required();

  auto * risk_cmd = app.add_subcommand("risk", "group risk, high-risk counts and propagation patterns");
  add_input(risk_cmd, c);
  add_grouping(risk_cmd, c);
  risk_cmd->add_option("--groups", c.groups_dir, "directory written by `group`")->required();
  risk_cmd->add_option("--out", c.out, "output directory")->required();

  auto * feat_cmd = app.add_subcommand("features", "formation and propagation feature tables");
  add_input(feat_cmd, c);
  add_grouping(feat_cmd, c);
  feat_cmd->add_option("--groups", c.groups_dir, "directory written by `group`")->required();
  feat_cmd->add_option("--out", c.out, "output directory")->required();

  auto * ff_cmd = app.add_subcommand("fit-formation", "binary logit for high-risk group formation");
  ff_cmd->add_option("--features", c.features_path, "formation.csv written by `features`")->required();
  ff_cmd->add_option("--out", c.out, "report path prefix (writes .txt and .json)");
  add_model(ff_cmd, c);

  auto * fp_cmd = app.add_subcommand("fit-propagation", "multinomial logit for risk propagation patterns");
  fp_cmd->add_option("--features", c.features_path, "propagation.csv written by `features`")->required();
  fp_cmd->add_option("--out", c.out, "report path prefix (writes .txt and .json)");
  add_model(fp_cmd, c);

  auto * ad_cmd = app.add_subcommand("adaptive-ttc", "density-conditioned TTC threshold map and size comparison");
  add_input(ad_cmd, c);
  add_grouping(ad_cmd, c);
  ad_cmd->add_option("--out", c.out, "output directory")->required();

  auto * syn_cmd = app.add_subcommand("synth", "generate a synthetic trajectory dataset");
  syn_cmd->add_option("--spec", c.spec_path, "scenario spec file")->required();
  syn_cmd->add_option("--out", c.out, "output directory")->required();

  auto * an_cmd = app.add_subcommand("analyze", "run every stage and write all reports");
  an_cmd->add_option("--in", c.run.input, "trajectory CSV (raw or sampled)");
  an_cmd->add_option("--geometry", c.run.geometry, "road geometry file");
  an_cmd->add_option("--scenario", c.scenario, "generate the input from this scenario spec instead");
  std::vector<double> intervals;
  an_cmd->add_option("--interval", intervals, "sample interval, s (repeatable; default 5, 2, 1)");
  an_cmd->add_option("--out", c.run.out_dir, "output directory")->capture_default_str();
  an_cmd->add_flag("--no-equalize", c.no_equalize, "do not equalize formation rows across intervals");
  an_cmd->add_flag("--skip-formation", c.skip_formation, "do not fit the formation models");
  an_cmd->add_flag("--skip-propagation", c.skip_propagation, "do not fit the propagation model");
  add_grouping(an_cmd, c);
  add_model(an_cmd, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    finalize(c);
    if (!intervals.empty()) c.run.intervals = intervals;
    if (*ingest_cmd) return cmd_ingest(c);
    if (*group_cmd) return cmd_group(c);
    if (*risk_cmd) return cmd_risk(c);
    if (*feat_cmd) return cmd_features(c);
    if (*ff_cmd) return cmd_fit(c, true);
    if (*fp_cmd) return cmd_fit(c, false);
    if (*ad_cmd) return cmd_adaptive(c);
    if (*syn_cmd) return cmd_synth(c);
    if (*an_cmd) return cmd_analyze(c);
  } catch (const UsageError & e) {
    return report(e, 1);
  } catch (const NumericError & e) {
    return report(e, 3);
  } catch (const Error & e) {
    return report(e, 2);
  } catch (const fs::filesystem_error & e) {
    std::cerr << "groupwise: io: " << e.what() << '\n';
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "groupwise: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
