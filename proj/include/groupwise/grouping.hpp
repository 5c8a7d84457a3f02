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

#ifndef GROUPWISE__GROUPING_HPP_
#define GROUPWISE__GROUPING_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/disjoint_set.hpp"
#include "groupwise/core/error.hpp"
#include "groupwise/core/parallel.hpp"
#include "groupwise/ssm.hpp"
#include "groupwise/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace groupwise::grouping
{

inline constexpr const char * kModule = "grouping";

/// TTC thresholds in effect at one frame.
struct FrameThresholds
{
  double ttc_in = 1.5;         // in-lane linking (adverse TTC), s
  double ttc_cross = 3.0;      // adjacent-lane merging (projected TTC), s
  double high_risk_ttc = 1.5;  // pair TTC below this counts as high risk, s
};

using ThresholdFn = std::function<FrameThresholds(const Frame &)>;

inline ThresholdFn static_thresholds(FrameThresholds th = {})
{
  return [th](const Frame &) { return th; };
}

/// How overlapping pairs are scored when collecting a group's pair TTCs.
struct PairPolicy
{
  double clamp = ssm::kTtcClamp;
  // Clamp overlaps of ordinary in-lane pairs too, instead of rejecting them.
  bool clamp_all_pairs = false;
};

/// A maximal run of linked vehicles in one lane, front vehicle first.
/// Members are indices into Frame::states.
struct Chain
{
  int lane = 0;
  std::vector<std::size_t> members;
};

struct VehicleGroup
{
  std::size_t group_id = 0;
  double t = 0.0;
  std::vector<std::size_t> members;        // indices into Frame::states, ascending
  std::vector<std::string> member_ids;     // sorted
  std::map<int, std::string> head_vehicles;  // lane -> foremost member
  std::vector<ssm::TtcResult> pair_ttcs;   // finite leader-follower TTCs among members

  std::size_t size() const { return members.size(); }

  std::vector<std::string> head_ids() const
  {
    std::vector<std::string> ids;
    for (const auto & [lane, id] : head_vehicles) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }
};

/// Indices of the vehicles in \p lane, front first (x descending, id ascending).
inline std::vector<std::size_t> lane_order(const Frame & frame, int lane)
{
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < frame.states.size(); ++i) {
    if (frame.states[i].lane_id == lane) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto & sa = frame.states[a];
    const auto & sb = frame.states[b];
    return sa.x != sb.x ? sa.x > sb.x : sa.vehicle_id < sb.vehicle_id;
  });
  return idx;
}

inline std::vector<int> occupied_lanes(const Frame & frame)
{
  std::vector<int> lanes;
  for (const auto & s : frame.states) lanes.push_back(s.lane_id);
  std::sort(lanes.begin(), lanes.end());
  lanes.erase(std::unique(lanes.begin(), lanes.end()), lanes.end());
  return lanes;
}

/// Splits one lane into chains: consecutive vehicles are linked when their
/// adverse-braking TTC is below \p ttc_in.
inline std::vector<Chain> segment_lane(
  const Frame & frame, int lane, const ssm::AdverseParams & params = {}, double ttc_in = 1.5)
{
  std::vector<Chain> chains;
  const auto order = lane_order(frame, lane);
  for (std::size_t k = 0; k < order.size(); ++k) {
    bool linked = false;
    if (k > 0) {
      const auto & lead = frame.states[order[k - 1]];
      const auto & foll = frame.states[order[k]];
      // A lane changer still straddling the line may overlap its new
      // neighbour; like any overlap that couples. Elsewhere overlap is bad data.
      if ((lead.lane_change || foll.lane_change) && !(ssm::gap(lead, foll) > 0.0)) {
        linked = true;
      } else {
        linked = ssm::adverse_ttc(lead, foll, params).value < ttc_in;
      }
    }
    if (!linked) {
      chains.push_back({lane, {}});
    }
    chains.back().members.push_back(order[k]);
  }
  return chains;
}

/// Whether two adjacent-lane vehicles couple their groups. Projected
/// overlap (side by side) always couples.
inline bool cross_coupled(const VehicleState & u, const VehicleState & w, double ttc_cross)
{
  const auto r = ssm::projected_ttc(u, w);
  return !r || r->value < ttc_cross;
}

inline void finish_group(const Frame & frame, VehicleGroup & g)
{
  std::sort(g.members.begin(), g.members.end());
  g.member_ids.clear();
  g.head_vehicles.clear();
  std::map<int, std::size_t> head;
  for (auto i : g.members) {
    const auto & s = frame.states[i];
    g.member_ids.push_back(s.vehicle_id);
    auto [it, fresh] = head.try_emplace(s.lane_id, i);
    if (!fresh) {
      const auto & cur = frame.states[it->second];
      if (s.x > cur.x || (s.x == cur.x && s.vehicle_id < cur.vehicle_id)) it->second = i;
    }
  }
  for (const auto & [lane, i] : head) g.head_vehicles[lane] = frame.states[i].vehicle_id;
  g.t = frame.t;
}

/// Unions chains that contain an adjacent-lane pair with projected TTC below
/// \p ttc_cross; the connected components are the frame's groups, ordered by
/// smallest member id.
inline std::vector<VehicleGroup> merge_adjacent(
  const Frame & frame, const std::vector<Chain> & chains, double ttc_cross = 3.0)
{
  const std::size_t n = frame.states.size();
  std::vector<std::size_t> chain_of(n, chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (auto i : chains[c].members) chain_of[i] = c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (chain_of[i] == chains.size()) {
      throw DataError(kModule, "chains do not cover vehicle " + frame.states[i].vehicle_id);
    }
  }

  std::map<int, std::vector<std::size_t>> by_lane;
  for (std::size_t i = 0; i < n; ++i) by_lane[frame.states[i].lane_id].push_back(i);

  DisjointSet uf(chains.size());
  for (const auto & [lane, here] : by_lane) {
    auto next = by_lane.find(lane + 1);
    if (next == by_lane.end()) continue;
    for (auto u : here) {
      for (auto w : next->second) {
        if (uf.find(chain_of[u]) == uf.find(chain_of[w])) continue;
        if (cross_coupled(frame.states[u], frame.states[w], ttc_cross)) {
          uf.unite(chain_of[u], chain_of[w]);
        }
      }
    }
  }

  std::map<std::size_t, VehicleGroup> comps;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    auto & g = comps[uf.find(c)];
    g.members.insert(g.members.end(), chains[c].members.begin(), chains[c].members.end());
  }
  std::vector<VehicleGroup> groups;
  groups.reserve(comps.size());
  for (auto & [root, g] : comps) {
    finish_group(frame, g);
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const auto & a, const auto & b) {
    return a.member_ids.front() < b.member_ids.front();
  });
  return groups;
}

/// Fills each group's pair TTC list with the finite standard TTCs of
/// immediate leader-follower pairs whose two vehicles are members. A
/// vehicle flagged as changing lanes is replaced by two projections, one in
/// its origin and one in its current lane; overlaps involving a projection
/// take `policy.clamp`.
inline void attach_pair_ttcs(
  const Frame & frame, std::vector<VehicleGroup> & groups, const PairPolicy & policy = {})
{
  std::vector<std::size_t> group_of(frame.states.size(), groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].pair_ttcs.clear();
    for (auto i : groups[g].members) group_of[i] = g;
  }

  struct Occupant
  {
    VehicleState state;
    std::size_t index;
    bool projection;
  };
  std::map<int, std::vector<Occupant>> lanes;
  for (std::size_t i = 0; i < frame.states.size(); ++i) {
    const auto & s = frame.states[i];
    if (s.lane_change && s.origin_lane != s.lane_id) {
      const auto copies = ssm::lane_change_projections(s, s.origin_lane, s.lane_id);
      lanes[copies[0].lane_id].push_back({copies[0], i, true});
      lanes[copies[1].lane_id].push_back({copies[1], i, true});
    } else {
      lanes[s.lane_id].push_back({s, i, false});
    }
  }
  for (auto & [lane, occ] : lanes) {
    std::sort(occ.begin(), occ.end(), [](const Occupant & a, const Occupant & b) {
      return a.state.x != b.state.x ? a.state.x > b.state.x
                                    : a.state.vehicle_id < b.state.vehicle_id;
    });
    for (std::size_t k = 1; k < occ.size(); ++k) {
      const auto & lead = occ[k - 1];
      const auto & foll = occ[k];
      const auto g = group_of[lead.index];
      if (g == groups.size() || g != group_of[foll.index]) continue;
      ssm::TtcResult r;
      if (lead.projection || foll.projection || policy.clamp_all_pairs) {
        r = ssm::projection_ttc(lead.state, foll.state, policy.clamp);
        if (!lead.projection && !foll.projection) r.kind = ssm::TtcKind::in_lane;
      } else {
        r = ssm::ttc(lead.state, foll.state);
      }
      if (r.finite()) groups[g].pair_ttcs.push_back(r);
    }
  }
}

/// Full per-frame segmentation: lane chains, cross-lane merge, pair TTCs.
inline std::vector<VehicleGroup> segment_frame(
  const Frame & frame, const ssm::AdverseParams & params, const FrameThresholds & th,
  const PairPolicy & policy = {})
{
  std::vector<Chain> chains;
  for (int lane : occupied_lanes(frame)) {
    auto c = segment_lane(frame, lane, params, th.ttc_in);
    chains.insert(chains.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  }
  auto groups = merge_adjacent(frame, chains, th.ttc_cross);
  attach_pair_ttcs(frame, groups, policy);
  return groups;
}

/// Size of the intersection of two sorted id lists.
inline std::size_t common_count(
  const std::vector<std::string> & a, const std::vector<std::string> & b)
{
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// Composition similarity: shared vehicles over the successor's size.
inline double similarity(const VehicleGroup & from, const VehicleGroup & to)
{
  return static_cast<double>(common_count(from.member_ids, to.member_ids)) /
         static_cast<double>(to.size());
}

/// One-to-one matching of groups at consecutive timestamps. Candidates share
/// at least one head vehicle. Pairs are accepted greedily by descending
/// similarity, then larger raw overlap, then smaller minimum vehicle id of
/// the successor (and of the predecessor, for a total order).
/// Returns, for each group in \p prev, the index of its successor in \p next.
inline std::vector<std::optional<std::size_t>> match_groups(
  const std::vector<VehicleGroup> & prev, const std::vector<VehicleGroup> & next)
{
  std::unordered_map<std::string, std::vector<std::size_t>> by_head;
  for (std::size_t k = 0; k < next.size(); ++k) {
    for (const auto & [lane, id] : next[k].head_vehicles) by_head[id].push_back(k);
  }
  struct Candidate
  {
    double s;
    std::size_t common;
    std::size_t from;
    std::size_t to;
  };
  std::vector<Candidate> cands;
  for (std::size_t p = 0; p < prev.size(); ++p) {
    std::vector<std::size_t> targets;
    for (const auto & [lane, id] : prev[p].head_vehicles) {
      if (auto it = by_head.find(id); it != by_head.end()) {
        targets.insert(targets.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (auto k : targets) {
      const auto common = common_count(prev[p].member_ids, next[k].member_ids);
      cands.push_back({static_cast<double>(common) / static_cast<double>(next[k].size()), common, p, k});
    }
  }
  std::sort(cands.begin(), cands.end(), [&](const Candidate & a, const Candidate & b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.common != b.common) return a.common > b.common;
    const auto & ta = next[a.to].member_ids.front();
    const auto & tb = next[b.to].member_ids.front();
    if (ta != tb) return ta < tb;
    const auto & fa = prev[a.from].member_ids.front();
    const auto & fb = prev[b.from].member_ids.front();
    if (fa != fb) return fa < fb;
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });

  std::vector<std::optional<std::size_t>> succ(prev.size());
  std::vector<bool> taken(next.size(), false);
  for (const auto & c : cands) {
    if (succ[c.from] || taken[c.to]) continue;
    succ[c.from] = c.to;
    taken[c.to] = true;
  }
  return succ;
}

/// Time-ordered chain of matched groups: (frame index, group index) steps.
struct GroupTrajectory
{
  std::vector<std::pair<std::size_t, std::size_t>> steps;
  std::size_t length() const { return steps.size(); }
};

struct GroupedDataset
{
  std::vector<std::vector<VehicleGroup>> groups;                      // per frame
  std::vector<std::vector<std::optional<std::size_t>>> successors;   // per frame, per group
  std::vector<FrameThresholds> thresholds;                            // per frame
  std::vector<GroupTrajectory> trajectories;

  const VehicleGroup & at(std::pair<std::size_t, std::size_t> step) const
  {
    return groups[step.first][step.second];
  }
};

struct GroupingOptions
{
  ssm::AdverseParams adverse;
  PairPolicy pairs;
  unsigned jobs = 1;
};

/// Chains matched pairs into maximal paths and keeps those spanning at
/// least two frames.
inline std::vector<GroupTrajectory> chain_trajectories(
  const std::vector<std::vector<VehicleGroup>> & groups,
  const std::vector<std::vector<std::optional<std::size_t>>> & successors)
{
  std::vector<std::vector<bool>> has_pred(groups.size());
  for (std::size_t f = 0; f < groups.size(); ++f) has_pred[f].assign(groups[f].size(), false);
  for (std::size_t f = 0; f + 1 < groups.size(); ++f) {
    for (const auto & s : successors[f]) {
      if (s) has_pred[f + 1][*s] = true;
    }
  }
  std::vector<GroupTrajectory> out;
  for (std::size_t f = 0; f < groups.size(); ++f) {
    for (std::size_t g = 0; g < groups[f].size(); ++g) {
      if (has_pred[f][g]) continue;
      GroupTrajectory tr;
      std::size_t ff = f;
      std::size_t gg = g;
      tr.steps.emplace_back(ff, gg);
      while (ff < successors.size() && successors[ff][gg]) {
        gg = *successors[ff][gg];
        ++ff;
        tr.steps.emplace_back(ff, gg);
      }
      if (tr.length() >= 2) out.push_back(std::move(tr));
    }
  }
  return out;
}

/// Segments every frame, matches consecutive frames (those exactly one
/// sample interval apart) and builds the group trajectories.
inline GroupedDataset build_trajectories(
  const Dataset & ds, const ThresholdFn & thresholds, const GroupingOptions & opt = {})
{
  opt.adverse.validate();
  GroupedDataset out;
  const std::size_t nf = ds.frames.size();
  out.groups.resize(nf);
  out.thresholds.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) out.thresholds[f] = thresholds(ds.frames[f]);
  parallel_for(nf, opt.jobs, [&](std::size_t f) {
    out.groups[f] = segment_frame(ds.frames[f], opt.adverse, out.thresholds[f], opt.pairs);
  });
  std::size_t next_id = 0;
  for (auto & frame_groups : out.groups) {
    for (auto & g : frame_groups) g.group_id = next_id++;
  }
  out.successors.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    out.successors[f].assign(out.groups[f].size(), std::nullopt);
    if (f + 1 < nf &&
        std::abs(ds.frames[f + 1].t - ds.frames[f].t - ds.sample_interval) <= 1e-6) {
      out.successors[f] = match_groups(out.groups[f], out.groups[f + 1]);
    }
  }
  out.trajectories = chain_trajectories(out.groups, out.successors);
  return out;
}

/// `t_s,group_id,vehicle_id,is_head,lane_id`
inline void write_groups(std::ostream & out, const Dataset & ds, const GroupedDataset & gd)
{
  out << "t_s,group_id,vehicle_id,is_head,lane_id\n";
  for (std::size_t f = 0; f < gd.groups.size(); ++f) {
    const auto & frame = ds.frames[f];
    for (const auto & g : gd.groups[f]) {
      for (auto i : g.members) {
        const auto & s = frame.states[i];
        const auto it = g.head_vehicles.find(s.lane_id);
        const bool head = it != g.head_vehicles.end() && it->second == s.vehicle_id;
        out << csv::fmt(frame.t) << ',' << g.group_id << ',' << s.vehicle_id << ','
            << (head ? 1 : 0) << ',' << s.lane_id << '\n';
      }
    }
  }
}

/// `trajectory_id,step,t_s,group_id`
inline void write_trajectories(std::ostream & out, const Dataset & ds, const GroupedDataset & gd)
{
  out << "trajectory_id,step,t_s,group_id\n";
  for (std::size_t k = 0; k < gd.trajectories.size(); ++k) {
    const auto & tr = gd.trajectories[k];
    for (std::size_t s = 0; s < tr.steps.size(); ++s) {
      out << k << ',' << s << ',' << csv::fmt(ds.frames[tr.steps[s].first].t) << ','
          << gd.at(tr.steps[s]).group_id << '\n';
    }
  }
}

/// Rebuilds a GroupedDataset from the two CSV artifacts above. Pair TTCs are
/// recomputed from the frames; matching is taken from the trajectory table.
inline GroupedDataset read_grouped(
  const csv::Table & groups_csv, const csv::Table & traj_csv, const Dataset & ds,
  const PairPolicy & policy = {})
{
  auto need = [](const csv::Table & t, const char * name) {
    auto c = t.column(name);
    if (!c) throw DataError(kModule, std::string("group artifact lacks column ") + name);
    return *c;
  };
  const auto c_t = need(groups_csv, "t_s");
  const auto c_g = need(groups_csv, "group_id");
  const auto c_v = need(groups_csv, "vehicle_id");

  std::map<long long, std::size_t> frame_of;
  for (std::size_t f = 0; f < ds.frames.size(); ++f) {
    frame_of[std::llround(ds.frames[f].t * 1e6)] = f;
  }
  GroupedDataset gd;
  gd.groups.resize(ds.frames.size());
  gd.thresholds.resize(ds.frames.size());
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> where;  // group_id -> (f, g)
  std::map<std::size_t, std::map<std::size_t, VehicleGroup>> staged;
  for (const auto & row : groups_csv.rows) {
    const auto t = csv::parse_double(row[c_t]);
    const auto gid = csv::parse_int(row[c_g]);
    if (!t || !gid) throw DataError(kModule, "unparseable group artifact row");
    const auto fit = frame_of.find(std::llround(*t * 1e6));
    if (fit == frame_of.end()) {
      throw DataError(kModule, "group artifact references unknown timestamp " + row[c_t]);
    }
    const auto idx = ds.frames[fit->second].find(row[c_v]);
    if (!idx) throw DataError(kModule, "group artifact references unknown vehicle " + row[c_v]);
    auto & g = staged[fit->second][static_cast<std::size_t>(*gid)];
    g.group_id = static_cast<std::size_t>(*gid);
    g.members.push_back(*idx);
  }
  for (auto & [f, gs] : staged) {
    for (auto & [gid, g] : gs) {
      finish_group(ds.frames[f], g);
      where[gid] = {f, gd.groups[f].size()};
      gd.groups[f].push_back(std::move(g));
    }
    attach_pair_ttcs(ds.frames[f], gd.groups[f], policy);
  }
  gd.successors.resize(ds.frames.size());
  for (std::size_t f = 0; f < ds.frames.size(); ++f) {
    gd.successors[f].assign(gd.groups[f].size(), std::nullopt);
  }
  const auto c_tr = need(traj_csv, "trajectory_id");
  const auto c_tg = need(traj_csv, "group_id");
  std::map<long long, std::vector<std::size_t>> chains;
  for (const auto & row : traj_csv.rows) {
    const auto tid = csv::parse_int(row[c_tr]);
    const auto gid = csv::parse_int(row[c_tg]);
    if (!tid || !gid) throw DataError(kModule, "unparseable trajectory artifact row");
    chains[*tid].push_back(static_cast<std::size_t>(*gid));
  }
  for (const auto & [tid, ids] : chains) {
    GroupTrajectory tr;
    for (auto gid : ids) {
      const auto it = where.find(gid);
      if (it == where.end()) throw DataError(kModule, "trajectory references unknown group");
      tr.steps.push_back(it->second);
    }
    for (std::size_t s = 0; s + 1 < tr.steps.size(); ++s) {
      gd.successors[tr.steps[s].first][tr.steps[s].second] = tr.steps[s + 1].second;
    }
    gd.trajectories.push_back(std::move(tr));
  }
  return gd;
}

}  // namespace groupwise::grouping

#endif  // GROUPWISE__GROUPING_HPP_
