#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rollmux/baselines.hpp"
#include "rollmux/cluster.hpp"
#include "rollmux/inter.hpp"
#include "test_util.hpp"

using namespace rollmux;

namespace {

ClusterState fresh_cluster() {
  ClusterState st;
  st.cfg = ClusterConfig{};
  return st;
}

void admit_rollmux(ClusterState& st, const JobSpec& job) {
  const auto d = schedule_job(st, job);
  ASSERT_NE(d.strategy, StrategyKind::kRejected);
  apply_admission(st, job, d.plan, 0.0);
}

void apply_decision(ClusterState& st, const JobSpec& job, const ScheduleDecision& d) {
  ASSERT_NE(d.strategy, StrategyKind::kRejected);
  apply_admission(st, job, d.plan, 0.0);
}

// Exhaustive reference optimizer: every set partition, every job→node map.
// Deliberately brute force so it shares no machinery with the implementation.
double reference_optimal_usd(const std::vector<JobSpec>& jobs, const ClusterConfig& cfg) {
  const std::size_t n = jobs.size();
  const double inf = std::numeric_limits<double>::infinity();

  auto block_usd = [&](const std::vector<std::size_t>& blk) -> double {
    if (blk.size() > static_cast<std::size_t>(cfg.max_group_residency)) return inf;
    double train_mem = 0.0;
    int train_nodes = 0;
    for (std::size_t j : blk) {
      train_mem += jobs[j].train.mem_gb;
      train_nodes = std::max(train_nodes, nodes_needed(jobs[j].train.gpus, cfg.gpus_per_node));
    }
    if (train_mem > cfg.host_mem_gb + kMemEps) return inf;

    const std::size_t m = blk.size();
    int best_nodes = -1;
    std::vector<std::size_t> assign(m, 0);
    while (true) {
      std::vector<double> node_roll(m, 0.0), node_mem(m, 0.0);
      for (std::size_t k = 0; k < m; ++k) {
        node_roll[assign[k]] += jobs[blk[k]].rollout.worst_case_s;
        node_mem[assign[k]] += jobs[blk[k]].rollout.mem_gb;
      }
      double max_node = 0.0, train_sum = 0.0, max_solo = 0.0;
      bool mem_ok = true;
      int used = 0;
      for (std::size_t v = 0; v < m; ++v) {
        max_node = std::max(max_node, node_roll[v]);
        if (node_mem[v] > cfg.host_mem_gb + kMemEps) mem_ok = false;
        if (node_roll[v] > 0.0) ++used;
      }
      for (std::size_t j : blk) {
        train_sum += jobs[j].train.worst_case_s;
        max_solo = std::max(max_solo, solo_time(jobs[j]));
      }
      const double period = std::max({max_node, train_sum, max_solo});
      bool slo_ok = true;
      for (std::size_t j : blk)
        if (period > jobs[j].slo * solo_time(jobs[j]) * (1.0 + kTimeEps)) slo_ok = false;
      if (mem_ok && slo_ok && (best_nodes < 0 || used < best_nodes)) best_nodes = used;

      std::size_t k = 0;
      while (k < m && assign[k] + 1 == m) assign[k++] = 0;
      if (k == m) break;
      ++assign[k];
    }
    if (best_nodes < 0) return inf;

    const double rate =
        best_nodes * cfg.gpus_per_node * cfg.kind_for(PoolRole::kRollout).hourly_cost_usd +
        train_nodes * cfg.gpus_per_node * cfg.kind_for(PoolRole::kTraining).hourly_cost_usd;

    // billable hours: sweep over lifetime endpoints
    std::vector<double> pts;
    for (std::size_t j : blk) {
      pts.push_back(jobs[j].arrival_s);
      pts.push_back(jobs[j].arrival_s + jobs[j].duration_s);
    }
    std::sort(pts.begin(), pts.end());
    double live = 0.0;
    for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
      const double mid = 0.5 * (pts[p] + pts[p + 1]);
      for (std::size_t j : blk)
        if (mid >= jobs[j].arrival_s && mid < jobs[j].arrival_s + jobs[j].duration_s) {
          live += pts[p + 1] - pts[p];
          break;
        }
    }
    return rate * live / 3600.0;
  };

  // restricted-growth enumeration of set partitions
  double best = inf;
  std::vector<std::size_t> label(n, 0);
  auto evaluate = [&]() {
    const std::size_t parts = 1 + *std::max_element(label.begin(), label.end());
    double total = 0.0;
    for (std::size_t p = 0; p < parts && total < inf; ++p) {
      std::vector<std::size_t> blk;
      for (std::size_t j = 0; j < n; ++j)
        if (label[j] == p) blk.push_back(j);
      total += block_usd(blk);
    }
    best = std::min(best, total);
  };
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t j, std::size_t maxl) {
    if (j == n) {
      evaluate();
      return;
    }
    for (std::size_t l = 0; l <= maxl + 1 && l < n; ++l) {
      label[j] = l;
      rec(j + 1, std::max(maxl, l));
    }
  };
  if (n > 0) rec(1, 0);  // job 0 is pinned to label 0
  if (n > 0) evaluate();
  return best;
}

std::vector<JobSpec> random_instance(Rng& rng, int max_jobs) {
  const int n = 2 + static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(max_jobs - 1)));
  std::vector<JobSpec> jobs;
  for (int j = 0; j < n; ++j) {
    const double roll = 30.0 + std::floor(rng.uniform(0.0, 270.0));
    const double train = 10.0 + std::floor(rng.uniform(0.0, 140.0));
    jobs.push_back(testutil::make_job("j" + std::to_string(j), roll, train,
                                      {.slo = rng.uniform(1.0, 2.0),
                                       .roll_mem_gb = 80.0 + std::floor(rng.uniform(0.0, 220.0)),
                                       .train_mem_gb = 60.0 + std::floor(rng.uniform(0.0, 140.0)),
                                       .duration_s = 36000.0}));
  }
  return jobs;
}

}  // namespace

TEST(SoloCost, MatchesThePriceBook) {
  const ClusterConfig cfg;
  const auto one = solo_cost({testutil::make_job("a", 100, 50, {.duration_s = 36000.0})}, cfg);
  EXPECT_NEAR(one.total_cost_usd, 570.40, 1e-9);
  EXPECT_DOUBLE_EQ(one.slo_attainment, 1.0);

  EXPECT_DOUBLE_EQ(solo_cost({}, cfg).total_cost_usd, 0.0);

  std::vector<JobSpec> three(3, testutil::make_job("a", 100, 50, {.duration_s = 36000.0}));
  EXPECT_NEAR(solo_cost(three, cfg).total_cost_usd, 3 * 570.40, 1e-9);
}

TEST(ColocatedCost, BillsOnlyTrainingHardware) {
  const ClusterConfig cfg;
  const auto one = colocated_cost({testutil::make_job("a", 100, 50, {.duration_s = 36000.0})}, cfg);
  EXPECT_NEAR(one.total_cost_usd, 422.40, 1e-9);
  EXPECT_DOUBLE_EQ(colocated_cost({}, cfg).total_cost_usd, 0.0);
}

TEST(OfflineOptimal, SingleJobCostsSolo) {
  const ClusterConfig cfg;
  const auto plan =
      offline_optimal({testutil::make_job("a", 100, 50, {.duration_s = 36000.0})}, cfg);
  ASSERT_EQ(plan.groups.size(), 1u);
  EXPECT_EQ(plan.groups[0].rollout_nodes, 1);
  EXPECT_EQ(plan.groups[0].train_nodes, 1);
  EXPECT_NEAR(plan.cost_rate_per_h, 57.04, 1e-9);
  EXPECT_NEAR(plan.cost_usd, 570.40, 1e-9);
}

TEST(OfflineOptimal, ComplementaryJobsShareOneGroup) {
  const ClusterConfig cfg;
  const auto plan =
      offline_optimal({testutil::make_job("a", 100, 50, {.slo = 2.0, .duration_s = 36000.0}),
                       testutil::make_job("b", 40, 90, {.slo = 2.0, .duration_s = 36000.0})},
                      cfg);
  ASSERT_EQ(plan.groups.size(), 1u);
  EXPECT_EQ(plan.groups[0].rollout_nodes, 1);
  EXPECT_NEAR(plan.cost_rate_per_h, 57.04, 1e-9);
}

TEST(OfflineOptimal, TightTrainingLoadForcesIsolation) {
  const ClusterConfig cfg;
  // two jobs whose training phases alone exceed either one's tolerated period
  const auto plan =
      offline_optimal({testutil::make_job("a", 50, 100, {.slo = 1.0, .duration_s = 36000.0}),
                       testutil::make_job("b", 50, 100, {.slo = 1.0, .duration_s = 36000.0})},
                      cfg);
  ASSERT_EQ(plan.groups.size(), 2u);
  EXPECT_NEAR(plan.cost_rate_per_h, 114.08, 1e-9);
}

TEST(OfflineOptimal, RolloutContentionBuysASecondNodeNotASecondGroup) {
  const ClusterConfig cfg;
  const auto plan =
      offline_optimal({testutil::make_job("a", 100, 50, {.slo = 1.0, .duration_s = 36000.0}),
                       testutil::make_job("b", 100, 50, {.slo = 1.0, .duration_s = 36000.0})},
                      cfg);
  ASSERT_EQ(plan.groups.size(), 1u);
  EXPECT_EQ(plan.groups[0].rollout_nodes, 2);
  EXPECT_NEAR(plan.cost_rate_per_h, 71.84, 1e-9);
}

TEST(OfflineOptimal, MatchesExhaustiveEnumeration) {
  const ClusterConfig cfg;
  Rng rng(mix_seed({0xba5e11, 7}));
  for (int trial = 0; trial < 150; ++trial) {
    const auto jobs = random_instance(rng, 6);
    const double got = offline_optimal(jobs, cfg).cost_usd;
    const double want = reference_optimal_usd(jobs, cfg);
    ASSERT_NEAR(got, want, 1e-6) << "trial " << trial << " with " << jobs.size() << " jobs";
  }
}

TEST(OfflineOptimal, RefusesOversizedOrGangInstances) {
  ClusterConfig cfg;
  cfg.optimal_max_jobs = 4;
  std::vector<JobSpec> five(5, testutil::make_job("a", 100, 50, {.duration_s = 36000.0}));
  EXPECT_THROW(offline_optimal(five, cfg), std::invalid_argument);

  const auto gang = testutil::make_job("g", 100, 50, {.roll_gpus = 16, .duration_s = 36000.0});
  EXPECT_THROW(offline_optimal({gang}, cfg), std::invalid_argument);

  const auto whale = testutil::make_job("w", 100, 50, {.roll_mem_gb = 2000.0, .duration_s = 3600.0});
  EXPECT_THROW(offline_optimal({whale}, cfg), std::runtime_error);
}

TEST(OfflineOptimal, DisjointLifetimesAreNotDoubleBilled) {
  const ClusterConfig cfg;
  // one hour of work, an hour of nothing, another hour: only 2 h are billed
  const auto plan = offline_optimal(
      {testutil::make_job("a", 100, 50, {.slo = 2.0, .arrival_s = 0.0, .duration_s = 3600.0}),
       testutil::make_job("b", 100, 50, {.slo = 2.0, .arrival_s = 7200.0, .duration_s = 3600.0})},
      cfg);
  EXPECT_NEAR(plan.cost_usd, 2 * 57.04, 1e-6);
}

TEST(OptimalCostBound, AgreesWithTheExactPlanOnOneWindow) {
  const ClusterConfig cfg;
  Rng rng(mix_seed({0xba5e11, 11}));
  const auto jobs = random_instance(rng, 6);
  EXPECT_NEAR(optimal_cost_bound(jobs, cfg), offline_optimal(jobs, cfg).cost_usd, 1e-9);
}

TEST(OptimalCostBound, WindowsLargeTracesAndSkipsGangs) {
  ClusterConfig cfg;
  cfg.optimal_window = 4;
  std::vector<JobSpec> jobs;
  for (int j = 0; j < 9; ++j)
    jobs.push_back(testutil::make_job("j" + std::to_string(j), 100, 50,
                                      {.arrival_s = 100.0 * j, .duration_s = 36000.0}));
  const double nine = optimal_cost_bound(jobs, cfg);
  EXPECT_GT(nine, 0.0);

  jobs.push_back(
      testutil::make_job("gang", 100, 50, {.roll_gpus = 16, .duration_s = 36000.0}));
  EXPECT_DOUBLE_EQ(optimal_cost_bound(jobs, cfg), nine);
}

TEST(RandomPlace, EmptyClusterOpensAGroup) {
  auto st = fresh_cluster();
  Rng rng(1);
  const auto d = random_place(st, testutil::make_job("a", 100, 50, {}), rng);
  EXPECT_EQ(d.strategy, StrategyKind::kIsolated);
}

TEST(RandomPlace, SameSeedSameChoice) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 100, 50, {.slo = 2.0}));
  admit_rollmux(st, testutil::make_job("b", 100, 100, {.slo = 1.0}));
  const auto j = testutil::make_job("x", 30, 20, {});
  Rng r1(77), r2(77);
  const auto d1 = random_place(st, j, r1);
  const auto d2 = random_place(st, j, r2);
  EXPECT_EQ(d1.strategy, d2.strategy);
  EXPECT_EQ(d1.group, d2.group);
  EXPECT_EQ(d1.plan.placement.rollout_nodes, d2.plan.placement.rollout_nodes);
}

TEST(RandomPlace, FullGroupsLeaveTheDraw) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 100, 50, {.slo = 2.0, .roll_mem_gb = 1000.0}));
  const auto big = testutil::make_job("x", 30, 20, {.roll_mem_gb = 200.0});
  Rng rng(5);
  for (int k = 0; k < 32; ++k)
    EXPECT_EQ(random_place(st, big, rng).strategy, StrategyKind::kIsolated);
}

TEST(RandomPlace, IgnoresTheServiceBoundEntirely) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 100, 40, {.slo = 1.2}));
  // sharing a's node would blow a's bound; random sometimes does it anyway
  const auto j = testutil::make_job("b", 100, 40, {.slo = 1.2});
  Rng rng(9);
  int packed = 0, isolated = 0;
  for (int k = 0; k < 64; ++k) {
    const auto d = random_place(st, j, rng);
    packed += d.strategy == StrategyKind::kDirectPacking;
    isolated += d.strategy == StrategyKind::kIsolated;
  }
  EXPECT_GT(packed, 0);
  EXPECT_GT(isolated, 0);
  EXPECT_EQ(packed + isolated, 64);
}

TEST(GreedyPlace, PrefersTheIdlestGroup) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 70, 30, {.slo = 10.0}));  // idle 30%
  admit_rollmux(st, testutil::make_job("b", 10, 90, {.slo = 1.05}));  // idle 10%
  ASSERT_EQ(st.groups.size(), 2u);

  const auto d = greedy_place(st, testutil::make_job("x", 10, 5, {}));
  EXPECT_EQ(d.strategy, StrategyKind::kDirectPacking);
  EXPECT_EQ(d.group, 0);
}

TEST(GreedyPlace, TieGoesToTheLowestGroupId) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 30, 70, {.slo = 1.0}));
  admit_rollmux(st, testutil::make_job("b", 30, 70, {.slo = 1.0}));
  ASSERT_EQ(st.groups.size(), 2u);
  const auto d = greedy_place(st, testutil::make_job("x", 10, 5, {}));
  EXPECT_EQ(d.group, 0);
}

TEST(GreedyPlace, PicksTheLightestNodeInsideTheGroup) {
  auto st = fresh_cluster();
  admit_rollmux(st, testutil::make_job("a", 100, 40, {.slo = 1.2}));
  admit_rollmux(st, testutil::make_job("b", 100, 40, {.slo = 1.2}));  // scales to node 2
  admit_rollmux(st, testutil::make_job("c", 30, 5, {.slo = 10.0}));   // packs onto node 0
  ASSERT_EQ(st.groups.size(), 1u);

  const auto d = greedy_place(st, testutil::make_job("x", 20, 10, {}));
  EXPECT_EQ(d.strategy, StrategyKind::kDirectPacking);
  ASSERT_EQ(d.plan.placement.rollout_nodes.size(), 1u);
  EXPECT_EQ(d.plan.placement.rollout_nodes[0], 2);  // 100 s beats 130 s
}

TEST(GreedyPlace, OpensAGroupOnlyWhenNothingFits) {
  auto st = fresh_cluster();
  st.cfg.max_group_residency = 1;
  admit_rollmux(st, testutil::make_job("a", 100, 50, {.slo = 2.0}));
  const auto d = greedy_place(st, testutil::make_job("x", 10, 5, {}));
  EXPECT_EQ(d.strategy, StrategyKind::kIsolated);
}

TEST(Baselines, CostOrderingHoldsOnRandomInstances) {
  const ClusterConfig cfg;
  Rng rng(mix_seed({0xba5e11, 23}));
  for (int trial = 0; trial < 150; ++trial) {
    const auto jobs = random_instance(rng, 6);
    auto st = fresh_cluster();
    for (const auto& j : jobs) {
      const auto d = schedule_job(st, j);
      ASSERT_NE(d.strategy, StrategyKind::kRejected);
      apply_admission(st, j, d.plan, 0.0);
    }
    const double hours = jobs[0].duration_s / 3600.0;
    const double rollmux_usd = st.cost_rate_per_h() * hours;
    const double optimal_usd = offline_optimal(jobs, cfg).cost_usd;
    const double solo_usd = solo_cost(jobs, cfg).total_cost_usd;
    ASSERT_LE(optimal_usd, rollmux_usd + 1e-6) << "trial " << trial;
    ASSERT_LE(rollmux_usd, solo_usd + 1e-6) << "trial " << trial;
  }
}

TEST(Baselines, RandomAndGreedyPlacementsStillApplyCleanly) {
  Rng rng(mix_seed({0xba5e11, 31}));
  for (int trial = 0; trial < 40; ++trial) {
    const auto jobs = random_instance(rng, 6);
    auto st_r = fresh_cluster();
    auto st_g = fresh_cluster();
    for (const auto& j : jobs) {
      apply_decision(st_r, j, random_place(st_r, j, rng));
      apply_decision(st_g, j, greedy_place(st_g, j));
    }
    EXPECT_TRUE(audit_cluster(st_r).ok());
    EXPECT_TRUE(audit_cluster(st_g).ok());
  }
}
