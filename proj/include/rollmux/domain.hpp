#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rollmux/rng.hpp"

// Core vocabulary for co-execution groups: jobs alternating rollout and
// training phases, node pools they are pinned to, and the host-memory
// residency ledger that decides whether a placement can keep its state warm.
namespace rollmux {

using NodeId = std::int64_t;
using GroupId = std::int64_t;
using JobId = std::string;

// slack for comparisons against accumulated footprints; memory is tracked in
// GB as doubles and exact-fit placements must not be lost to rounding
inline constexpr double kMemEps = 1e-9;

enum class PoolRole { kRollout, kTraining };

inline const char* to_string(PoolRole r) {
  return r == PoolRole::kRollout ? "rollout" : "training";
}

struct GpuKind {
  std::string name;
  double hourly_cost_usd = 0.0;
  PoolRole role = PoolRole::kRollout;

  void validate() const {
    if (name.empty()) throw std::invalid_argument("GpuKind: name must not be empty");
    if (!(hourly_cost_usd > 0.0)) throw std::invalid_argument("GpuKind: hourly cost must be positive");
  }
};

// default price book: memory-bound rollout on H20, compute-bound training on H800
inline GpuKind h20_kind() { return {"H20", 1.85, PoolRole::kRollout}; }
inline GpuKind h800_kind() { return {"H800", 5.28, PoolRole::kTraining}; }

struct ClusterConfig {
  std::vector<GpuKind> gpu_kinds = {h20_kind(), h800_kind()};
  int gpus_per_node = 8;
  double host_mem_gb = 1024.0;
  int max_group_residency = 5;

  // scheduler knobs
  int packing_candidate_cap = 64;
  double migration_threshold = 0.8;
  double migration_pause_s = 5.0;
  double sync_handoff_s = 0.0;
  int optimal_max_jobs = 13;
  int optimal_window = 10;

  const GpuKind& kind_for(PoolRole role) const {
    for (const GpuKind& k : gpu_kinds)
      if (k.role == role) return k;
    throw std::invalid_argument(std::string("ClusterConfig: no gpu kind serves ") + to_string(role));
  }

  void validate() const {
    if (gpu_kinds.empty()) throw std::invalid_argument("ClusterConfig: gpu_kinds must not be empty");
    for (const GpuKind& k : gpu_kinds) k.validate();
    kind_for(PoolRole::kRollout);
    kind_for(PoolRole::kTraining);
    if (gpus_per_node <= 0) throw std::invalid_argument("ClusterConfig: gpus_per_node must be positive");
    if (!(host_mem_gb > 0.0)) throw std::invalid_argument("ClusterConfig: host_mem_gb must be positive");
    if (max_group_residency < 1) throw std::invalid_argument("ClusterConfig: max_group_residency must be >= 1");
    if (packing_candidate_cap < 1) throw std::invalid_argument("ClusterConfig: packing_candidate_cap must be >= 1");
    if (!(migration_threshold > 0.0 && migration_threshold < 1.0))
      throw std::invalid_argument("ClusterConfig: migration_threshold must lie in (0, 1)");
    if (migration_pause_s < 0.0) throw std::invalid_argument("ClusterConfig: migration_pause_s must be >= 0");
    if (sync_handoff_s < 0.0) throw std::invalid_argument("ClusterConfig: sync_handoff_s must be >= 0");
    if (optimal_max_jobs < 1) throw std::invalid_argument("ClusterConfig: optimal_max_jobs must be >= 1");
    if (optimal_window < 1) throw std::invalid_argument("ClusterConfig: optimal_window must be >= 1");
  }
};

struct Node {
  NodeId id = -1;
  GpuKind kind;
  int gpus = 8;
  double host_mem_gb = 1024.0;
  double host_mem_used_gb = 0.0;

  double host_mem_avail_gb() const { return host_mem_gb - host_mem_used_gb; }

  void validate() const {
    kind.validate();
    if (gpus <= 0) throw std::invalid_argument("Node: gpus must be positive");
    if (!(host_mem_gb > 0.0)) throw std::invalid_argument("Node: host_mem_gb must be positive");
    if (host_mem_used_gb < -kMemEps || host_mem_used_gb > host_mem_gb + kMemEps)
      throw std::invalid_argument("Node: host_mem_used_gb out of range");
  }
};

struct PhaseProfile {
  double worst_case_s = 0.0;  // duration when every response runs to the token cap
  double mem_gb = 0.0;        // host-memory footprint per occupied node
  int gpus = 0;

  void validate() const {
    if (!(worst_case_s > 0.0)) throw std::invalid_argument("PhaseProfile: worst_case_s must be positive");
    if (!(mem_gb > 0.0)) throw std::invalid_argument("PhaseProfile: mem_gb must be positive");
    if (gpus <= 0) throw std::invalid_argument("PhaseProfile: gpus must be positive");
  }
};

enum class TailFamily { kLognormalTruncated, kEmpirical };

// Per-request response-length model; phase duration scales with the longest
// sampled length so a cap-length batch reproduces the worst case exactly.
struct LengthDistribution {
  TailFamily family = TailFamily::kLognormalTruncated;
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> lengths;  // empirical family only
  double cap = 0.0;

  void validate() const {
    if (!(cap > 0.0)) throw std::invalid_argument("LengthDistribution: cap must be positive");
    if (family == TailFamily::kLognormalTruncated) {
      if (!(sigma >= 0.0)) throw std::invalid_argument("LengthDistribution: sigma must be >= 0");
      if (!std::isfinite(mu) || !std::isfinite(sigma))
        throw std::invalid_argument("LengthDistribution: mu/sigma must be finite");
    } else {
      if (lengths.empty()) throw std::invalid_argument("LengthDistribution: empirical family needs samples");
      for (double v : lengths)
        if (!(v > 0.0)) throw std::invalid_argument("LengthDistribution: empirical lengths must be positive");
    }
  }

  // one response length in (0, cap]; the cap has positive mass
  double sample(Rng& rng) const {
    if (family == TailFamily::kLognormalTruncated)
      return std::min(cap, std::exp(mu + sigma * rng.normal()));
    return std::min(cap, lengths[rng.uniform_u64(lengths.size())]);
  }
};

// mu placing `cap_fraction` of the lognormal mass at or above the cap
inline double lognormal_mu_for_cap_fraction(double cap, double sigma, double cap_fraction) {
  if (!(cap > 0.0)) throw std::invalid_argument("cap must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return std::log(cap) - sigma * normal_quantile(1.0 - cap_fraction);
}

struct JobSpec {
  JobId id;
  double arrival_s = 0.0;
  double duration_s = 0.0;  // wall-clock lease; the job leaves once it expires
  PhaseProfile rollout;
  PhaseProfile train;
  double slo = 1.0;  // tolerated iteration-time ratio vs. running alone; may be +inf
  double max_tokens = 0.0;
  LengthDistribution tail;

  void validate() const {
    if (id.empty()) throw std::invalid_argument("JobSpec: id must not be empty");
    if (arrival_s < 0.0) throw std::invalid_argument("JobSpec: arrival_s must be >= 0");
    if (!(duration_s > 0.0)) throw std::invalid_argument("JobSpec: duration_s must be positive");
    rollout.validate();
    train.validate();
    if (std::isnan(slo) || slo < 1.0) throw std::invalid_argument("JobSpec: slo must be >= 1");
    if (!(max_tokens > 0.0)) throw std::invalid_argument("JobSpec: max_tokens must be positive");
    tail.validate();
    if (std::fabs(tail.cap - max_tokens) > kMemEps)
      throw std::invalid_argument("JobSpec: tail cap must equal max_tokens");
  }
};

inline double solo_time(const JobSpec& j) { return j.rollout.worst_case_s + j.train.worst_case_s; }

inline int nodes_needed(int gpus, int gpus_per_node) {
  return (gpus + gpus_per_node - 1) / gpus_per_node;
}

struct Placement {
  JobId job;
  std::vector<NodeId> rollout_nodes;
  std::vector<NodeId> train_nodes;

  void validate() const {
    if (job.empty()) throw std::invalid_argument("Placement: job id must not be empty");
    if (rollout_nodes.empty() || train_nodes.empty())
      throw std::invalid_argument("Placement: node sets must not be empty");
    auto sorted_unique = [](std::vector<NodeId> v) {
      std::sort(v.begin(), v.end());
      return std::adjacent_find(v.begin(), v.end()) == v.end();
    };
    if (!sorted_unique(rollout_nodes) || !sorted_unique(train_nodes))
      throw std::invalid_argument("Placement: node sets must not repeat nodes");
    for (NodeId r : rollout_nodes)
      for (NodeId t : train_nodes)
        if (r == t) throw std::invalid_argument("Placement: rollout and train nodes must be disjoint");
  }
};

// One job's phase execution inside a meta-iteration; training rows list the
// whole training pool since training phases serialize across it.
struct PhaseExec {
  JobId job;
  PoolRole pool = PoolRole::kRollout;
  std::vector<NodeId> nodes;
  double start_s = 0.0;
  double end_s = 0.0;
  int cycle = 0;
  bool migrated = false;
};

struct MetaIterationSchedule {
  std::vector<PhaseExec> phases;
  double cycle_time_s = 0.0;  // steady-state period of the repeating pattern
};

struct CoExecGroup {
  GroupId id = -1;
  std::vector<JobSpec> jobs;
  std::vector<Placement> placements;  // parallel to jobs
  std::vector<Node> rollout_pool;
  std::vector<Node> train_pool;
  double provisioned_at_s = 0.0;

  const JobSpec* find_job(const JobId& id_) const {
    for (const JobSpec& j : jobs)
      if (j.id == id_) return &j;
    return nullptr;
  }

  const Placement* find_placement(const JobId& id_) const {
    for (const Placement& p : placements)
      if (p.job == id_) return &p;
    return nullptr;
  }

  Node* find_node(NodeId n) {
    for (Node& node : rollout_pool)
      if (node.id == n) return &node;
    for (Node& node : train_pool)
      if (node.id == n) return &node;
    return nullptr;
  }

  const Node* find_node(NodeId n) const {
    return const_cast<CoExecGroup*>(this)->find_node(n);
  }

  void validate() const {
    if (jobs.size() != placements.size())
      throw std::invalid_argument("CoExecGroup: jobs and placements must pair up");
    for (const Node& n : rollout_pool) {
      n.validate();
      if (n.kind.role != PoolRole::kRollout)
        throw std::invalid_argument("CoExecGroup: rollout pool node with non-rollout gpu kind");
    }
    for (const Node& n : train_pool) {
      n.validate();
      if (n.kind.role != PoolRole::kTraining)
        throw std::invalid_argument("CoExecGroup: train pool node with non-training gpu kind");
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      jobs[i].validate();
      placements[i].validate();
      if (placements[i].job != jobs[i].id)
        throw std::invalid_argument("CoExecGroup: placement order must match job order");
      for (NodeId n : placements[i].rollout_nodes) {
        const Node* node = find_node(n);
        if (node == nullptr || node->kind.role != PoolRole::kRollout)
          throw std::invalid_argument("CoExecGroup: placement references unknown rollout node");
      }
      for (NodeId n : placements[i].train_nodes) {
        const Node* node = find_node(n);
        if (node == nullptr || node->kind.role != PoolRole::kTraining)
          throw std::invalid_argument("CoExecGroup: placement references unknown train node");
      }
    }
  }
};

// True iff every node the placement touches keeps its residents plus the new
// job within host memory.  Exact fits pass; unknown nodes are an error.
inline bool residency_feasible(const CoExecGroup& g, const JobSpec& job, const Placement& p) {
  p.validate();
  auto fits = [&](const std::vector<NodeId>& ids, double footprint_gb, PoolRole role) {
    for (NodeId id : ids) {
      const Node* node = g.find_node(id);
      if (node == nullptr)
        throw std::out_of_range("residency_feasible: unknown node id " + std::to_string(id));
      if (node->kind.role != role)
        throw std::invalid_argument("residency_feasible: node role does not match phase");
      if (footprint_gb > node->host_mem_avail_gb() + kMemEps) return false;
    }
    return true;
  };
  return fits(p.rollout_nodes, job.rollout.mem_gb, PoolRole::kRollout) &&
         fits(p.train_nodes, job.train.mem_gb, PoolRole::kTraining);
}

// Rollout node sets must cover the job's GPU demand; training intentionally
// runs with whatever pool the group owns, at unchanged duration.
inline void validate_placement_capacity(const CoExecGroup& g, const JobSpec& job, const Placement& p) {
  int rollout_gpus = 0;
  for (NodeId id : p.rollout_nodes) {
    const Node* node = g.find_node(id);
    if (node == nullptr)
      throw std::out_of_range("placement references unknown node id " + std::to_string(id));
    rollout_gpus += node->gpus;
  }
  if (rollout_gpus < job.rollout.gpus)
    throw std::invalid_argument("placement rollout nodes cover " + std::to_string(rollout_gpus) +
                                " GPUs, job needs " + std::to_string(job.rollout.gpus));
}

}  // namespace rollmux
