#pragma once
// Comparison policies.  Random and greedy-most-idle reuse the candidate
// machinery but skip the steady-period admission bound, so they reproduce the
// SLO violations a load-blind scheduler makes.  The clairvoyant partition
// optimizer and the solo / colocated cost models anchor the two ends of the
// cost scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rollmux/cluster.hpp"
#include "rollmux/cost.hpp"
#include "rollmux/domain.hpp"
#include "rollmux/inter.hpp"
#include "rollmux/intra.hpp"
#include "rollmux/rng.hpp"

namespace rollmux {

namespace detail {

// Packing candidates of `g` that the memory ledger allows; no SLO screening.
inline std::vector<PlacementCandidate> feasible_packings(const ClusterState& st,
                                                         const CoExecGroup& g,
                                                         const JobSpec& job) {
  std::vector<PlacementCandidate> fits;
  for (auto& c : generate_placements(st, g, job)) {
    if (c.strategy != StrategyKind::kDirectPacking) continue;
    if (memory_feasible(st, &g, job, c)) fits.push_back(std::move(c));
  }
  return fits;
}

inline bool group_open(const ClusterState& st, const CoExecGroup& g) {
  return !g.jobs.empty() && g.jobs.size() < static_cast<std::size_t>(st.cfg.max_group_residency);
}

inline ScheduleDecision finish_decision(const ClusterState& st, const JobSpec& job,
                                        ScheduleDecision d, const PlacementCandidate* pick) {
  if (pick != nullptr) {
    d.strategy = pick->strategy;
    d.group = pick->group;
    d.delta_cost_per_h = pick->delta_cost_per_h;
    d.plan = to_plan(*pick);
    return d;
  }
  const PlacementCandidate iso = isolated_candidate(st, job);
  ++d.candidates_evaluated;
  if (memory_feasible(st, nullptr, job, iso)) {
    d.strategy = StrategyKind::kIsolated;
    d.delta_cost_per_h = iso.delta_cost_per_h;
    d.plan = to_plan(iso);
  } else {
    d.strategy = StrategyKind::kRejected;
    d.plan.strategy = StrategyKind::kRejected;
  }
  return d;
}

}  // namespace detail

// Uniform draw over {each group with room, one fresh group}, then a uniform
// draw over the chosen group's feasible packings.  Capacity, residency and
// memory still hold; the steady-period bound does not.
inline ScheduleDecision random_place(const ClusterState& st, const JobSpec& job, Rng& rng) {
  ScheduleDecision d;
  d.job = job.id;

  std::vector<std::pair<GroupId, std::vector<PlacementCandidate>>> options;
  for (const auto& [gid, g] : st.groups) {
    if (!detail::group_open(st, g)) continue;
    auto fits = detail::feasible_packings(st, g, job);
    d.candidates_evaluated += static_cast<int>(fits.size());
    if (!fits.empty()) options.emplace_back(gid, std::move(fits));
  }

  const std::uint64_t arm = rng.uniform_u64(options.size() + 1);
  if (arm == options.size()) return detail::finish_decision(st, job, std::move(d), nullptr);
  auto& [gid, fits] = options[arm];
  const auto& pick = fits[rng.uniform_u64(fits.size())];
  return detail::finish_decision(st, job, std::move(d), &pick);
}

// Greedy most-idle: the group with the largest bubble fraction wins (ties to
// the lowest id), and inside it the placement that leaves the lightest
// bottleneck node.  Again no steady-period screening.
inline ScheduleDecision greedy_place(const ClusterState& st, const JobSpec& job) {
  ScheduleDecision d;
  d.job = job.id;

  const PlacementCandidate* best = nullptr;
  std::vector<PlacementCandidate> kept;
  double best_idle = -std::numeric_limits<double>::infinity();
  GroupId best_gid = -1;
  for (const auto& [gid, g] : st.groups) {
    if (!detail::group_open(st, g)) continue;
    auto fits = detail::feasible_packings(st, g, job);
    d.candidates_evaluated += static_cast<int>(fits.size());
    if (fits.empty()) continue;
    const GroupLoad ld = group_load(g);
    const double idle = 1.0 - ld.load_s / ld.cycle_s;
    if (idle <= best_idle) continue;
    best_idle = idle;
    best_gid = gid;
    kept = std::move(fits);
  }
  if (best_gid >= 0) {
    // lightest resulting bottleneck node; candidate enumeration breaks ties
    std::unordered_map<NodeId, double> load;
    const CoExecGroup& g = *st.find_group(best_gid);
    for (std::size_t i = 0; i < g.jobs.size(); ++i)
      for (NodeId n : g.placements[i].rollout_nodes) load[n] += g.jobs[i].rollout.worst_case_s;
    double best_peak = std::numeric_limits<double>::infinity();
    for (const auto& c : kept) {
      double peak = 0.0;
      for (NodeId n : c.placement.rollout_nodes)
        peak = std::max(peak, load[n] + job.rollout.worst_case_s);
      if (peak < best_peak) {
        best_peak = peak;
        best = &c;
      }
    }
  }
  return detail::finish_decision(st, job, std::move(d), best);
}

// ---------------------------------------------------------------------------
// Static cost anchors.

struct StaticCostReport {
  double total_cost_usd = 0.0;
  double slo_attainment = 1.0;
  std::vector<std::pair<JobId, double>> per_job_usd;
};

// Every job on its own rollout + training islands for its whole lifetime.
inline StaticCostReport solo_cost(const std::vector<JobSpec>& jobs, const ClusterConfig& cfg) {
  StaticCostReport r;
  const double roll_rate = cfg.gpus_per_node * cfg.kind_for(PoolRole::kRollout).hourly_cost_usd;
  const double train_rate = cfg.gpus_per_node * cfg.kind_for(PoolRole::kTraining).hourly_cost_usd;
  for (const JobSpec& j : jobs) {
    const double rate = nodes_needed(j.rollout.gpus, cfg.gpus_per_node) * roll_rate +
                        nodes_needed(j.train.gpus, cfg.gpus_per_node) * train_rate;
    const double usd = rate * j.duration_s / 3600.0;
    r.per_job_usd.emplace_back(j.id, usd);
    r.total_cost_usd += usd;
  }
  return r;
}

// Both phases share the training hardware, sized by the training gang; the
// job's configured lifetime already reflects the phases running back to back.
inline StaticCostReport colocated_cost(const std::vector<JobSpec>& jobs,
                                       const ClusterConfig& cfg) {
  StaticCostReport r;
  const double train_rate = cfg.gpus_per_node * cfg.kind_for(PoolRole::kTraining).hourly_cost_usd;
  for (const JobSpec& j : jobs) {
    const double rate = nodes_needed(j.train.gpus, cfg.gpus_per_node) * train_rate;
    const double usd = rate * j.duration_s / 3600.0;
    r.per_job_usd.emplace_back(j.id, usd);
    r.total_cost_usd += usd;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Clairvoyant partition optimizer.

struct OptimalGroupPlan {
  std::vector<JobId> jobs;
  std::vector<int> node_of_job;  // rollout node index per member, same order
  int rollout_nodes = 0;
  int train_nodes = 0;
  double cost_rate_per_h = 0.0;
  double live_hours = 0.0;  // union of member lifetimes the nodes are billed
};

struct OptimalPlan {
  std::vector<OptimalGroupPlan> groups;
  double cost_rate_per_h = 0.0;
  double cost_usd = 0.0;
};

namespace detail {

struct BlockEval {
  bool feasible = false;
  int rollout_nodes = 0;
  int train_nodes = 0;
  double rate_per_h = 0.0;
  double live_h = 0.0;
  double cost_usd = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> node_covers;  // which block members share each node
};

// Hours during which at least one member is alive; nodes idle in gaps between
// disjoint lifetimes are not billed to the lower bound.
inline double union_live_hours(const std::vector<JobSpec>& jobs, std::uint32_t mask) {
  std::vector<std::pair<double, double>> iv;
  for (std::size_t j = 0; j < jobs.size(); ++j)
    if (mask >> j & 1u) iv.emplace_back(jobs[j].arrival_s, jobs[j].arrival_s + jobs[j].duration_s);
  std::sort(iv.begin(), iv.end());
  double total = 0.0, lo = 0.0, hi = -1.0;
  for (const auto& [a, b] : iv) {
    if (a > hi) {
      if (hi > lo) total += hi - lo;
      lo = a;
      hi = b;
    } else {
      hi = std::max(hi, b);
    }
  }
  if (hi > lo) total += hi - lo;
  return total / 3600.0;
}

inline BlockEval evaluate_block(const std::vector<JobSpec>& jobs, std::uint32_t mask,
                                const ClusterConfig& cfg) {
  BlockEval ev;
  std::vector<std::size_t> idx;
  double bound = std::numeric_limits<double>::infinity();
  double max_solo = 0.0, train_sum = 0.0, train_mem = 0.0;
  int train_nodes = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!(mask >> j & 1u)) continue;
    idx.push_back(j);
    bound = std::min(bound, jobs[j].slo * solo_time(jobs[j]));
    max_solo = std::max(max_solo, solo_time(jobs[j]));
    train_sum += jobs[j].train.worst_case_s;
    train_mem += jobs[j].train.mem_gb;
    train_nodes = std::max(train_nodes, nodes_needed(jobs[j].train.gpus, cfg.gpus_per_node));
  }
  if (idx.size() > static_cast<std::size_t>(cfg.max_group_residency)) return ev;
  const double slack = bound * (1.0 + kTimeEps);
  if (max_solo > slack || train_sum > slack) return ev;
  if (train_mem > cfg.host_mem_gb + kMemEps) return ev;

  // fewest rollout nodes that hold every member within the period bound and
  // the host memory budget; jobs here occupy one node each, so this is a
  // two-constraint bin cover over subsets
  const std::size_t m = idx.size();
  const std::uint32_t full = (1u << m) - 1u;
  std::vector<char> node_ok(full + 1, 0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    double t = 0.0, mem = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      if (s >> k & 1u) {
        t += jobs[idx[k]].rollout.worst_case_s;
        mem += jobs[idx[k]].rollout.mem_gb;
      }
    node_ok[s] = t <= slack && mem <= cfg.host_mem_gb + kMemEps;
  }
  constexpr int kNoCover = 1 << 20;
  std::vector<int> bins(full + 1, kNoCover);
  std::vector<std::uint32_t> chosen(full + 1, 0);
  bins[0] = 0;
  for (std::uint32_t s = 1; s <= full; ++s) {
    const std::uint32_t low = s & (~s + 1u);
    for (std::uint32_t t = s; t != 0; t = (t - 1) & s) {
      if (!(t & low) || !node_ok[t] || bins[s ^ t] >= kNoCover) continue;
      if (bins[s ^ t] + 1 < bins[s]) {
        bins[s] = bins[s ^ t] + 1;
        chosen[s] = t;
      }
    }
  }
  if (bins[full] >= kNoCover) return ev;
  for (std::uint32_t s = full; s != 0; s ^= chosen[s]) ev.node_covers.push_back(chosen[s]);

  ev.feasible = true;
  ev.rollout_nodes = bins[full];
  ev.train_nodes = train_nodes;
  ev.rate_per_h =
      ev.rollout_nodes * cfg.gpus_per_node * cfg.kind_for(PoolRole::kRollout).hourly_cost_usd +
      ev.train_nodes * cfg.gpus_per_node * cfg.kind_for(PoolRole::kTraining).hourly_cost_usd;
  ev.live_h = union_live_hours(jobs, mask);
  ev.cost_usd = ev.rate_per_h * ev.live_h;
  return ev;
}

}  // namespace detail

// Minimum-dollar grouping of a small job set, free to reorder and re-group
// arrivals.  Works block by block: a grouping is billed as the sum of its
// blocks, and each block is costed at its cheapest feasible node footprint.
inline OptimalPlan offline_optimal(const std::vector<JobSpec>& jobs, const ClusterConfig& cfg) {
  const std::size_t n = jobs.size();
  if (n == 0) return {};
  if (n > static_cast<std::size_t>(cfg.optimal_max_jobs))
    throw std::invalid_argument("offline_optimal: " + std::to_string(n) +
                                " jobs exceed the exhaustive-search cap of " +
                                std::to_string(cfg.optimal_max_jobs) +
                                "; evaluate windows of at most that many jobs instead");
  for (const JobSpec& j : jobs)
    if (nodes_needed(j.rollout.gpus, cfg.gpus_per_node) > 1)
      throw std::invalid_argument("offline_optimal: job '" + j.id +
                                  "' needs a multi-node rollout gang; the exhaustive search "
                                  "only covers single-node rollout jobs");

  const std::uint32_t full = (1u << n) - 1u;
  std::vector<detail::BlockEval> block(full + 1);
  std::vector<char> block_done(full + 1, 0);
  auto eval = [&](std::uint32_t mask) -> const detail::BlockEval& {
    if (!block_done[mask]) {
      block[mask] = detail::evaluate_block(jobs, mask, cfg);
      block_done[mask] = 1;
    }
    return block[mask];
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(full + 1, inf);
  std::vector<std::uint32_t> pick(full + 1, 0);
  best[0] = 0.0;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const std::uint32_t low = mask & (~mask + 1u);
    for (std::uint32_t sub = mask; sub != 0; sub = (sub - 1) & mask) {
      if (!(sub & low)) continue;
      const auto& ev = eval(sub);
      if (!ev.feasible || best[mask ^ sub] == inf) continue;
      const double cost = ev.cost_usd + best[mask ^ sub];
      if (cost < best[mask]) {
        best[mask] = cost;
        pick[mask] = sub;
      }
    }
  }
  if (best[full] == inf)
    throw std::runtime_error("offline_optimal: some job fits on no node at all");

  OptimalPlan plan;
  plan.cost_usd = best[full];
  for (std::uint32_t rest = full; rest != 0; rest ^= pick[rest]) {
    const std::uint32_t sub = pick[rest];
    const auto& ev = eval(sub);
    OptimalGroupPlan g;
    std::uint32_t local = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(sub >> j & 1u)) continue;
      g.jobs.push_back(jobs[j].id);
      for (std::size_t node = 0; node < ev.node_covers.size(); ++node)
        if (ev.node_covers[node] >> local & 1u) g.node_of_job.push_back(static_cast<int>(node));
      ++local;
    }
    g.rollout_nodes = ev.rollout_nodes;
    g.train_nodes = ev.train_nodes;
    g.cost_rate_per_h = ev.rate_per_h;
    g.live_hours = ev.live_h;
    plan.cost_rate_per_h += g.cost_rate_per_h;
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

// Clairvoyant floor for a whole trace.  The timeline is cut at arrival seams
// so that each span touches at most a window's worth of distinct jobs; every
// job is clipped to the span and each span is solved exactly.  Restricting
// any schedule to a span yields a feasible plan for the clipped jobs, so the
// span optimum can never exceed what that schedule spends inside the span,
// and disjoint spans add up without double counting — the sum stays below
// every policy's bill.  Multi-node rollout gangs and jobs that fit on no
// node are left out entirely, and an over-crowded span sheds its shortest
// residents; all three only ever lower the floor.
inline double optimal_cost_bound(const std::vector<JobSpec>& jobs, const ClusterConfig& cfg) {
  std::vector<JobSpec> eligible;
  for (const JobSpec& j : jobs) {
    if (nodes_needed(j.rollout.gpus, cfg.gpus_per_node) != 1) continue;
    if (!detail::evaluate_block({j}, 1u, cfg).feasible) continue;
    eligible.push_back(j);
  }
  if (eligible.empty()) return 0.0;
  std::sort(eligible.begin(), eligible.end(), [](const JobSpec& a, const JobSpec& b) {
    return a.arrival_s != b.arrival_s ? a.arrival_s < b.arrival_s : a.id < b.id;
  });
  const std::size_t window =
      static_cast<std::size_t>(std::max(1, std::min(cfg.optimal_window, cfg.optimal_max_jobs)));

  std::vector<double> seams = {eligible.front().arrival_s};
  {
    std::vector<std::size_t> touched;  // jobs intersecting the open span
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      const double at = eligible[i].arrival_s;
      if (touched.size() + 1 > window && at > seams.back()) {
        seams.push_back(at);
        std::vector<std::size_t> carry;
        for (std::size_t k : touched)
          if (eligible[k].arrival_s + eligible[k].duration_s > at) carry.push_back(k);
        touched = std::move(carry);
      }
      touched.push_back(i);
    }
  }
  double horizon = seams.back();
  for (const JobSpec& j : eligible) horizon = std::max(horizon, j.arrival_s + j.duration_s);
  seams.push_back(horizon);

  double total = 0.0;
  for (std::size_t w = 0; w + 1 < seams.size(); ++w) {
    const double lo = seams[w], hi = seams[w + 1];
    if (!(hi > lo)) continue;
    std::vector<JobSpec> clipped;
    for (const JobSpec& j : eligible) {
      const double from = std::max(j.arrival_s, lo);
      const double to = std::min(j.arrival_s + j.duration_s, hi);
      if (!(to > from)) continue;
      JobSpec c = j;
      c.arrival_s = from;
      c.duration_s = to - from;
      clipped.push_back(std::move(c));
    }
    if (clipped.empty()) continue;
    if (clipped.size() > static_cast<std::size_t>(cfg.optimal_max_jobs)) {
      std::sort(clipped.begin(), clipped.end(), [](const JobSpec& a, const JobSpec& b) {
        if (a.duration_s != b.duration_s) return a.duration_s > b.duration_s;
        return a.arrival_s != b.arrival_s ? a.arrival_s < b.arrival_s : a.id < b.id;
      });
      clipped.resize(static_cast<std::size_t>(cfg.optimal_max_jobs));
    }
    total += offline_optimal(clipped, cfg).cost_usd;
  }
  return total;
}

}  // namespace rollmux
