#include <gtest/gtest.h>

#include "rollmux/cost.hpp"
#include "rollmux/intra.hpp"
#include "test_util.hpp"

using namespace rollmux;

namespace {

CoExecGroup pool_only(int rollout_nodes, int train_nodes) {
  CoExecGroup g;
  g.id = 0;
  for (int i = 0; i < rollout_nodes; ++i)
    g.rollout_pool.push_back(testutil::make_node(i, PoolRole::kRollout));
  for (int i = 0; i < train_nodes; ++i)
    g.train_pool.push_back(testutil::make_node(1000 + i, PoolRole::kTraining));
  return g;
}

}  // namespace

TEST(Cost, SingleRolloutNodeRate) {
  const auto c = group_cost(pool_only(1, 0));
  EXPECT_NEAR(c.rollout_per_h, 14.80, 1e-12);
  EXPECT_NEAR(c.total_per_h(), 14.80, 1e-12);
}

TEST(Cost, OnePlusOneGroupRate) {
  const auto c = group_cost(pool_only(1, 1));
  EXPECT_NEAR(c.rollout_per_h, 14.80, 1e-12);
  EXPECT_NEAR(c.train_per_h, 42.24, 1e-12);
  EXPECT_NEAR(c.total_per_h(), 57.04, 1e-12);
}

TEST(Cost, TwoPlusOneGroupRate) {
  EXPECT_NEAR(group_cost(pool_only(2, 1)).total_per_h(), 71.84, 1e-12);
}

TEST(Cost, TenHourSoloLease) {
  EXPECT_NEAR(group_cost(pool_only(1, 1)).total_per_h() * 10.0, 570.40, 1e-9);
}

TEST(Cost, MarginalCostOfAddedRolloutNode) {
  const auto before = pool_only(1, 1);
  auto after = before;
  after.rollout_pool.push_back(testutil::make_node(1, PoolRole::kRollout));
  EXPECT_NEAR(marginal_cost(before, after), 14.80, 1e-12);
  EXPECT_NEAR(marginal_cost(before, before), 0.0, 1e-12);
}

TEST(Cost, MarginalCostRejectsDroppedNodes) {
  const auto before = pool_only(2, 1);
  auto after = before;
  after.rollout_pool.pop_back();
  EXPECT_THROW(marginal_cost(before, after), std::invalid_argument);
}

TEST(Utilization, SplitPlacementPairUsesFourteenFifteenths) {
  const auto g = testutil::make_group(
      {testutil::make_job("a", 100, 50), testutil::make_job("b", 40, 90)}, {{0}, {1}});
  const auto sched = round_robin_schedule(g);
  const auto u = utilization(g, sched);
  EXPECT_NEAR(u.meta_iteration_s, 150.0, 1e-9);
  EXPECT_NEAR(u.u_rollout, 140.0 / 150.0, 1e-9);
  EXPECT_NEAR(u.u_train, 140.0 / 150.0, 1e-9);
  EXPECT_FALSE(u.overloaded);
}

TEST(Utilization, RejectsForeignJobsAndZeroPeriod) {
  const auto g = testutil::make_group({testutil::make_job("a", 100, 50)}, {{0}});
  MetaIterationSchedule s;
  s.cycle_time_s = 0.0;
  EXPECT_THROW(utilization(g, s), std::invalid_argument);

  s.cycle_time_s = 100.0;
  PhaseExec ph;
  ph.job = "ghost";
  ph.pool = PoolRole::kRollout;
  ph.start_s = 0.0;
  ph.end_s = 10.0;
  s.phases.push_back(ph);
  EXPECT_THROW(utilization(g, s), std::invalid_argument);
}

TEST(Utilization, FlagsSchedulesThatOverfillAPool) {
  const auto g = testutil::make_group({testutil::make_job("a", 100, 50)}, {{0}});
  MetaIterationSchedule s;
  s.cycle_time_s = 100.0;
  PhaseExec ph;
  ph.job = "a";
  ph.pool = PoolRole::kRollout;
  ph.start_s = 0.0;
  ph.end_s = 150.0;
  s.phases.push_back(ph);
  const auto u = utilization(g, s);
  EXPECT_TRUE(u.overloaded);
  EXPECT_NEAR(u.u_rollout, 1.5, 1e-12);
}
