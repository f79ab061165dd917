#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rollmux/cost.hpp"
#include "rollmux/domain.hpp"

// Mutable cluster: the set of live co-execution groups plus id counters and
// provisioning ledgers.  Scheduling policies only read this state and emit
// plans; apply_admission is the single place nodes and memory get committed,
// so the auditors below can hold every invariant against it.
namespace rollmux {

enum class StrategyKind { kDirectPacking, kRolloutScaling, kIsolated, kRejected };

inline const char* to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::kDirectPacking: return "direct-packing";
    case StrategyKind::kRolloutScaling: return "rollout-scaling";
    case StrategyKind::kIsolated: return "isolated";
    case StrategyKind::kRejected: return "rejected";
  }
  return "unknown";
}

// How a job would join the cluster.  New nodes are named before they exist:
// ids count up from first_new_node_id, rollout nodes first, so a plan is
// only valid against the state it was computed for.
struct AdmissionPlan {
  StrategyKind strategy = StrategyKind::kRejected;
  GroupId group = -1;  // join this group; -1 provisions a new one
  Placement placement;
  int new_rollout_nodes = 0;
  int new_train_nodes = 0;
  NodeId first_new_node_id = -1;
  double delta_cost_per_h = 0.0;
};

struct ClusterState {
  ClusterConfig cfg;
  std::map<GroupId, CoExecGroup> groups;
  NodeId next_node_id = 0;
  GroupId next_group_id = 0;
  std::int64_t nodes_provisioned = 0;
  std::int64_t nodes_released = 0;

  CoExecGroup* find_group(GroupId id) {
    auto it = groups.find(id);
    return it == groups.end() ? nullptr : &it->second;
  }
  const CoExecGroup* find_group(GroupId id) const {
    auto it = groups.find(id);
    return it == groups.end() ? nullptr : &it->second;
  }

  double cost_rate_per_h() const {
    double rate = 0.0;
    for (const auto& [id, g] : groups) rate += group_cost(g).total_per_h();
    return rate;
  }

  int total_gpus(PoolRole role) const {
    int gpus = 0;
    for (const auto& [id, g] : groups)
      for (const Node& n : role == PoolRole::kRollout ? g.rollout_pool : g.train_pool)
        gpus += n.gpus;
    return gpus;
  }
};

inline GroupId apply_admission(ClusterState& st, const JobSpec& job, const AdmissionPlan& plan,
                               double now_s) {
  if (plan.strategy == StrategyKind::kRejected)
    throw std::invalid_argument("apply_admission: plan rejects the job");
  job.validate();
  plan.placement.validate();
  if (plan.placement.job != job.id)
    throw std::invalid_argument("apply_admission: plan was computed for job " + plan.placement.job);
  const int new_nodes = plan.new_rollout_nodes + plan.new_train_nodes;
  if (new_nodes > 0 && plan.first_new_node_id != st.next_node_id)
    throw std::logic_error("apply_admission: plan is stale, node ids moved");

  CoExecGroup* g;
  if (plan.group >= 0) {
    g = st.find_group(plan.group);
    if (g == nullptr)
      throw std::out_of_range("apply_admission: group " + std::to_string(plan.group) + " not found");
    if (static_cast<int>(g->jobs.size()) >= st.cfg.max_group_residency)
      throw std::logic_error("apply_admission: group is at its residency cap");
  } else {
    const GroupId gid = st.next_group_id++;
    auto [it, inserted] = st.groups.emplace(gid, CoExecGroup{});
    g = &it->second;
    g->id = gid;
    g->provisioned_at_s = now_s;
  }

  for (int i = 0; i < plan.new_rollout_nodes; ++i) {
    Node n;
    n.id = st.next_node_id++;
    n.kind = st.cfg.kind_for(PoolRole::kRollout);
    n.gpus = st.cfg.gpus_per_node;
    n.host_mem_gb = st.cfg.host_mem_gb;
    g->rollout_pool.push_back(n);
  }
  for (int i = 0; i < plan.new_train_nodes; ++i) {
    Node n;
    n.id = st.next_node_id++;
    n.kind = st.cfg.kind_for(PoolRole::kTraining);
    n.gpus = st.cfg.gpus_per_node;
    n.host_mem_gb = st.cfg.host_mem_gb;
    g->train_pool.push_back(n);
  }
  st.nodes_provisioned += new_nodes;

  if (!residency_feasible(*g, job, plan.placement))
    throw std::logic_error("apply_admission: placement no longer fits in host memory");
  validate_placement_capacity(*g, job, plan.placement);

  for (NodeId id : plan.placement.rollout_nodes)
    g->find_node(id)->host_mem_used_gb += job.rollout.mem_gb;
  for (NodeId id : plan.placement.train_nodes)
    g->find_node(id)->host_mem_used_gb += job.train.mem_gb;
  g->jobs.push_back(job);
  g->placements.push_back(plan.placement);
  g->validate();
  return g->id;
}

// Drops the job and its memory reservations; the group keeps (and keeps
// paying for) its nodes until decommissioned.
inline void remove_job(ClusterState& st, GroupId gid, const JobId& job) {
  CoExecGroup* g = st.find_group(gid);
  if (g == nullptr) throw std::out_of_range("remove_job: group " + std::to_string(gid) + " not found");
  for (std::size_t i = 0; i < g->jobs.size(); ++i) {
    if (g->jobs[i].id != job) continue;
    for (NodeId id : g->placements[i].rollout_nodes)
      g->find_node(id)->host_mem_used_gb -= g->jobs[i].rollout.mem_gb;
    for (NodeId id : g->placements[i].train_nodes)
      g->find_node(id)->host_mem_used_gb -= g->jobs[i].train.mem_gb;
    g->jobs.erase(g->jobs.begin() + static_cast<std::ptrdiff_t>(i));
    g->placements.erase(g->placements.begin() + static_cast<std::ptrdiff_t>(i));
    return;
  }
  throw std::out_of_range("remove_job: job " + job + " not in group " + std::to_string(gid));
}

inline void decommission_group(ClusterState& st, GroupId gid) {
  CoExecGroup* g = st.find_group(gid);
  if (g == nullptr)
    throw std::out_of_range("decommission_group: group " + std::to_string(gid) + " not found");
  if (!g->jobs.empty())
    throw std::logic_error("decommission_group: group " + std::to_string(gid) + " still has jobs");
  st.nodes_released += static_cast<std::int64_t>(g->rollout_pool.size() + g->train_pool.size());
  st.groups.erase(gid);
}

struct AuditReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Recomputes every invariant from scratch: node-id uniqueness, placement
// integrity, the host-memory ledger, residency caps, and node conservation.
inline AuditReport audit_cluster(const ClusterState& st) {
  AuditReport rep;
  const auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };

  std::unordered_set<NodeId> seen_nodes;
  std::int64_t live_nodes = 0;
  for (const auto& [gid, g] : st.groups) {
    if (g.id != gid) fail("group " + std::to_string(gid) + " disagrees with its map key");
    if (gid >= st.next_group_id) fail("group " + std::to_string(gid) + " above the id counter");
    if (static_cast<int>(g.jobs.size()) > st.cfg.max_group_residency)
      fail("group " + std::to_string(gid) + " exceeds the residency cap");
    if (g.jobs.size() != g.placements.size())
      fail("group " + std::to_string(gid) + " jobs and placements diverge");

    std::unordered_map<NodeId, double> want_used;
    std::unordered_map<NodeId, const Node*> nodes;
    const auto scan_pool = [&](const std::vector<Node>& pool, PoolRole role) {
      for (const Node& n : pool) {
        ++live_nodes;
        if (!seen_nodes.insert(n.id).second)
          fail("node " + std::to_string(n.id) + " appears in more than one pool");
        if (n.id >= st.next_node_id) fail("node " + std::to_string(n.id) + " above the id counter");
        if (n.kind.role != role)
          fail("node " + std::to_string(n.id) + " has the wrong gpu kind for its pool");
        nodes[n.id] = &n;
        want_used[n.id] = 0.0;
      }
    };
    scan_pool(g.rollout_pool, PoolRole::kRollout);
    scan_pool(g.train_pool, PoolRole::kTraining);

    for (std::size_t i = 0; i < g.jobs.size() && i < g.placements.size(); ++i) {
      if (g.placements[i].job != g.jobs[i].id)
        fail("group " + std::to_string(gid) + " placement " + std::to_string(i) +
             " names the wrong job");
      for (NodeId id : g.placements[i].rollout_nodes) {
        auto it = nodes.find(id);
        if (it == nodes.end() || it->second->kind.role != PoolRole::kRollout)
          fail("job " + g.jobs[i].id + " rolls out on a node the group does not own");
        else
          want_used[id] += g.jobs[i].rollout.mem_gb;
      }
      for (NodeId id : g.placements[i].train_nodes) {
        auto it = nodes.find(id);
        if (it == nodes.end() || it->second->kind.role != PoolRole::kTraining)
          fail("job " + g.jobs[i].id + " trains on a node the group does not own");
        else
          want_used[id] += g.jobs[i].train.mem_gb;
      }
    }
    for (const auto& [id, node] : nodes) {
      const double want = want_used[id];
      if (std::fabs(node->host_mem_used_gb - want) > 1e-6)
        fail("node " + std::to_string(id) + " memory ledger " +
             std::to_string(node->host_mem_used_gb) + " != resident sum " + std::to_string(want));
      if (node->host_mem_used_gb > node->host_mem_gb + kMemEps)
        fail("node " + std::to_string(id) + " is over its host memory");
    }
  }
  if (st.nodes_provisioned - st.nodes_released != live_nodes)
    fail("node conservation: provisioned " + std::to_string(st.nodes_provisioned) + " - released " +
         std::to_string(st.nodes_released) + " != live " + std::to_string(live_nodes));
  return rep;
}

}  // namespace rollmux
