#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rollmux/cluster.hpp"
#include "rollmux/intra.hpp"

// Inter-group admission.  Each arriving job is offered to every group that
// still has headroom, two ways per group: direct packing onto existing
// rollout nodes (zero marginal cost) and rollout scaling onto fresh nodes
// (rollout-node cost only, the training pool is shared as-is).  Whatever
// passes the host-memory and slowdown gates competes on marginal dollars;
// provisioning an isolated group is the fallback and must be strictly
// cheaper to win over any shared placement.
namespace rollmux {

struct PlacementCandidate {
  StrategyKind strategy = StrategyKind::kRejected;
  GroupId group = -1;
  Placement placement;
  int new_rollout_nodes = 0;
  int new_train_nodes = 0;
  NodeId first_new_node_id = -1;
  double delta_cost_per_h = 0.0;
  int group_nodes_after = 0;
};

// Every way `job` could join group `g`: subsets of existing rollout nodes in
// best-fit order (most-loaded first, capped), then one all-new-nodes option.
// Gates are the caller's job; this only enumerates shapes.
inline std::vector<PlacementCandidate> generate_placements(const ClusterState& st,
                                                           const CoExecGroup& g,
                                                           const JobSpec& job) {
  std::vector<PlacementCandidate> out;
  if (g.train_pool.empty()) return out;
  const int want = nodes_needed(job.rollout.gpus, st.cfg.gpus_per_node);
  const int group_nodes = static_cast<int>(g.rollout_pool.size() + g.train_pool.size());

  std::vector<NodeId> train_ids;
  for (const Node& n : g.train_pool) train_ids.push_back(n.id);
  std::sort(train_ids.begin(), train_ids.end());

  std::unordered_map<NodeId, double> load;
  for (std::size_t i = 0; i < g.jobs.size(); ++i)
    for (NodeId n : g.placements[i].rollout_nodes) load[n] += g.jobs[i].rollout.worst_case_s;
  std::vector<NodeId> ranked;
  for (const Node& n : g.rollout_pool) ranked.push_back(n.id);
  std::sort(ranked.begin(), ranked.end(), [&](NodeId a, NodeId b) {
    const double la = load.count(a) ? load.at(a) : 0.0;
    const double lb = load.count(b) ? load.at(b) : 0.0;
    if (la != lb) return la > lb;
    return a < b;
  });

  if (static_cast<int>(ranked.size()) >= want) {
    std::vector<int> pick(static_cast<std::size_t>(want));
    for (int i = 0; i < want; ++i) pick[static_cast<std::size_t>(i)] = i;
    const int n = static_cast<int>(ranked.size());
    while (static_cast<int>(out.size()) < st.cfg.packing_candidate_cap) {
      PlacementCandidate c;
      c.strategy = StrategyKind::kDirectPacking;
      c.group = g.id;
      c.placement.job = job.id;
      for (int i : pick) c.placement.rollout_nodes.push_back(ranked[static_cast<std::size_t>(i)]);
      std::sort(c.placement.rollout_nodes.begin(), c.placement.rollout_nodes.end());
      c.placement.train_nodes = train_ids;
      c.delta_cost_per_h = 0.0;
      c.group_nodes_after = group_nodes;
      out.push_back(std::move(c));

      // next combination in lexicographic order
      int i = want - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - want + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < want; ++k)
        pick[static_cast<std::size_t>(k)] = pick[static_cast<std::size_t>(k - 1)] + 1;
    }
  }

  PlacementCandidate scale;
  scale.strategy = StrategyKind::kRolloutScaling;
  scale.group = g.id;
  scale.placement.job = job.id;
  scale.new_rollout_nodes = want;
  scale.first_new_node_id = st.next_node_id;
  for (int i = 0; i < want; ++i) scale.placement.rollout_nodes.push_back(st.next_node_id + i);
  scale.placement.train_nodes = train_ids;
  scale.delta_cost_per_h = static_cast<double>(want) * st.cfg.gpus_per_node *
                           st.cfg.kind_for(PoolRole::kRollout).hourly_cost_usd;
  scale.group_nodes_after = group_nodes + want;
  out.push_back(std::move(scale));
  return out;
}

inline PlacementCandidate isolated_candidate(const ClusterState& st, const JobSpec& job) {
  PlacementCandidate c;
  c.strategy = StrategyKind::kIsolated;
  c.group = -1;
  c.placement.job = job.id;
  c.new_rollout_nodes = nodes_needed(job.rollout.gpus, st.cfg.gpus_per_node);
  c.new_train_nodes = nodes_needed(job.train.gpus, st.cfg.gpus_per_node);
  c.first_new_node_id = st.next_node_id;
  NodeId next = st.next_node_id;
  for (int i = 0; i < c.new_rollout_nodes; ++i) c.placement.rollout_nodes.push_back(next++);
  for (int i = 0; i < c.new_train_nodes; ++i) c.placement.train_nodes.push_back(next++);
  c.delta_cost_per_h =
      c.new_rollout_nodes * st.cfg.gpus_per_node * st.cfg.kind_for(PoolRole::kRollout).hourly_cost_usd +
      c.new_train_nodes * st.cfg.gpus_per_node * st.cfg.kind_for(PoolRole::kTraining).hourly_cost_usd;
  c.group_nodes_after = c.new_rollout_nodes + c.new_train_nodes;
  return c;
}

// Host-memory gate.  Existing nodes must absorb the job's footprint on top
// of their residents; planned-new nodes offer the full configured memory.
inline bool memory_feasible(const ClusterState& st, const CoExecGroup* g,
                            const JobSpec& job, const PlacementCandidate& c) {
  const auto fits = [&](const std::vector<NodeId>& ids, double footprint) {
    for (NodeId id : ids) {
      double avail = st.cfg.host_mem_gb;
      if (id < st.next_node_id) {
        const Node* node = g == nullptr ? nullptr : g->find_node(id);
        if (node == nullptr) return false;
        avail = node->host_mem_avail_gb();
      }
      if (footprint > avail + kMemEps) return false;
    }
    return true;
  };
  return fits(c.placement.rollout_nodes, job.rollout.mem_gb) &&
         fits(c.placement.train_nodes, job.train.mem_gb);
}

struct ScheduleDecision {
  JobId job;
  StrategyKind strategy = StrategyKind::kRejected;
  GroupId group = -1;
  double delta_cost_per_h = 0.0;
  int candidates_evaluated = 0;
  std::int64_t latency_us = 0;  // left at zero unless latency recording is on
  AdmissionPlan plan;
};

inline AdmissionPlan to_plan(const PlacementCandidate& c) {
  AdmissionPlan plan;
  plan.strategy = c.strategy;
  plan.group = c.group;
  plan.placement = c.placement;
  plan.new_rollout_nodes = c.new_rollout_nodes;
  plan.new_train_nodes = c.new_train_nodes;
  plan.first_new_node_id = c.first_new_node_id;
  plan.delta_cost_per_h = c.delta_cost_per_h;
  return plan;
}

// One admission decision: scan groups in id order, gate every candidate on
// memory and on the whole group's slowdown bounds, keep the cheapest
// (marginal dollars, then resulting group size, then group id), and fall
// back to an isolated group only when that is strictly cheaper or nothing
// shared survived the gates.
inline ScheduleDecision schedule_job(const ClusterState& st, const JobSpec& job,
                                     bool record_latency = false) {
  const auto t0 = std::chrono::steady_clock::now();
  job.validate();
  ScheduleDecision d;
  d.job = job.id;

  std::optional<PlacementCandidate> best;
  const auto better = [](const PlacementCandidate& a, const PlacementCandidate& b) {
    if (a.delta_cost_per_h != b.delta_cost_per_h) return a.delta_cost_per_h < b.delta_cost_per_h;
    if (a.group_nodes_after != b.group_nodes_after) return a.group_nodes_after < b.group_nodes_after;
    return a.group < b.group;
  };

  for (const auto& [gid, g] : st.groups) {
    if (g.jobs.empty()) continue;
    if (static_cast<int>(g.jobs.size()) >= st.cfg.max_group_residency) continue;
    if (is_saturated(g)) continue;
    for (auto& c : generate_placements(st, g, job)) {
      ++d.candidates_evaluated;
      if (!memory_feasible(st, &g, job, c)) continue;
      if (!slo_check(g, job, c.placement, st.cfg.sync_handoff_s)) continue;
      if (!best || better(c, *best)) best = std::move(c);
    }
  }

  const PlacementCandidate iso = isolated_candidate(st, job);
  ++d.candidates_evaluated;
  const bool iso_fits = memory_feasible(st, nullptr, job, iso);
  if (best && (!iso_fits || !(iso.delta_cost_per_h < best->delta_cost_per_h))) {
    d.plan = to_plan(*best);
  } else if (iso_fits) {
    d.plan = to_plan(iso);
  } else {
    d.plan.strategy = StrategyKind::kRejected;
  }
  d.strategy = d.plan.strategy;
  d.group = d.plan.group;
  d.delta_cost_per_h = d.plan.strategy == StrategyKind::kRejected ? 0.0 : d.plan.delta_cost_per_h;
  if (record_latency)
    d.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return d;
}

}  // namespace rollmux
