#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "rollmux/domain.hpp"

// Dollar accounting.  A group pays for every GPU it has provisioned for its
// whole lifetime, idle or not; that is what makes bubble-filling worth money.
namespace rollmux {

struct CostBreakdown {
  double rollout_per_h = 0.0;
  double train_per_h = 0.0;

  double total_per_h() const { return rollout_per_h + train_per_h; }
};

inline CostBreakdown group_cost(const CoExecGroup& g) {
  CostBreakdown c;
  for (const Node& n : g.rollout_pool) c.rollout_per_h += n.gpus * n.kind.hourly_cost_usd;
  for (const Node& n : g.train_pool) c.train_per_h += n.gpus * n.kind.hourly_cost_usd;
  return c;
}

// Added hourly cost of growing `before` into `after`.  `after` must still
// contain every node of `before`; groups only shrink by decommissioning.
inline double marginal_cost(const CoExecGroup& before, const CoExecGroup& after) {
  std::unordered_set<NodeId> after_ids;
  for (const Node& n : after.rollout_pool) after_ids.insert(n.id);
  for (const Node& n : after.train_pool) after_ids.insert(n.id);
  auto require_kept = [&](const Node& n) {
    if (after_ids.find(n.id) == after_ids.end())
      throw std::invalid_argument("marginal_cost: node " + std::to_string(n.id) +
                                  " present before but missing after");
  };
  for (const Node& n : before.rollout_pool) require_kept(n);
  for (const Node& n : before.train_pool) require_kept(n);
  return group_cost(after).total_per_h() - group_cost(before).total_per_h();
}

struct UtilizationPair {
  double u_rollout = 0.0;
  double u_train = 0.0;
  double meta_iteration_s = 0.0;
  bool overloaded = false;  // set when either value exceeds 1: the schedule
                            // carries more work than one period holds
};

// Busy-time share of each pool across one meta-iteration.  Every phase
// execution counts once regardless of how many nodes it spans.
inline UtilizationPair utilization(const CoExecGroup& g, const MetaIterationSchedule& s) {
  if (!(s.cycle_time_s > 0.0))
    throw std::invalid_argument("utilization: schedule has no positive meta-iteration time");
  UtilizationPair u;
  u.meta_iteration_s = s.cycle_time_s;
  for (const PhaseExec& p : s.phases) {
    if (g.find_job(p.job) == nullptr)
      throw std::invalid_argument("utilization: schedule phase for job " + p.job +
                                  " that is not in the group");
    const double busy = p.end_s - p.start_s;
    if (p.pool == PoolRole::kRollout)
      u.u_rollout += busy / s.cycle_time_s;
    else
      u.u_train += busy / s.cycle_time_s;
  }
  u.overloaded = u.u_rollout > 1.0 + 1e-12 || u.u_train > 1.0 + 1e-12;
  return u;
}

}  // namespace rollmux
