#include <gtest/gtest.h>

#include "rollmux/rng.hpp"
#include "rollmux/syncmodel.hpp"

using namespace rollmux;

namespace {

SyncTopology default_topology() {
  SyncTopology t;
  t.model_bytes = 14.0e9;
  return t;
}

}  // namespace

TEST(SyncModel, FlatDragsOneCopyPerReplica) {
  const auto t = default_topology();
  EXPECT_DOUBLE_EQ(flat_cross_traffic_bytes(t), 8 * 14.0e9);
  EXPECT_NEAR(flat_sync_time(t), 8 * 14.0e9 / gbps_to_bytes_per_s(20.0), 1e-9);

  auto wide = t;
  wide.rollout_gpus = 16;
  EXPECT_DOUBLE_EQ(flat_cross_traffic_bytes(wide), 2 * flat_cross_traffic_bytes(t));
}

TEST(SyncModel, HierarchicalCrossTrafficIsOneCopy) {
  auto t = default_topology();
  for (int r : {1, 2, 8, 32})
    for (int n : {1, 4, 8}) {
      t.rollout_gpus = r;
      t.train_gpus = n;
      EXPECT_DOUBLE_EQ(hierarchical_cross_traffic_bytes(t), 14.0e9);
    }
}

TEST(SyncModel, DefaultSpeedupLandsNearTheReplicaCount) {
  const auto t = default_topology();
  const double speedup = sync_speedup(t);
  // per byte: flat 3.2e-9, scatter 4e-10, plus one shard of the hidden ring
  const double expect = 3.2e-9 / (4e-10 + (7.0 / 4e11) / 8.0);
  EXPECT_NEAR(speedup, expect, 1e-12 * expect);
  EXPECT_GT(speedup, 7.5);
  EXPECT_LT(speedup, 8.5);
}

TEST(SyncModel, SingleReplicaDegeneratesToFlat) {
  auto t = default_topology();
  t.rollout_gpus = 1;
  EXPECT_NEAR(hierarchical_sync_time(t), flat_sync_time(t), 1e-12);
}

TEST(SyncModel, NeverSlowerThanFlatOnSaneLinks) {
  Rng rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    SyncTopology t;
    t.model_bytes = rng.uniform(1e9, 1e12);
    t.rollout_gpus = 1 + static_cast<int>(rng.uniform_u64(63));
    t.train_gpus = 1 + static_cast<int>(rng.uniform_u64(15));
    t.cross_bw_bytes_s = gbps_to_bytes_per_s(rng.uniform(1.0, 100.0));
    t.intra_bw_bytes_s = t.cross_bw_bytes_s * rng.uniform(1.0, 50.0);
    t.per_stream_overhead_s = rng.uniform(0.0, 2.0);
    ASSERT_LE(hierarchical_sync_time(t), flat_sync_time(t) + 1e-9);
    ASSERT_LE(sync_speedup(t), t.rollout_gpus + 1e-9);
  }
}

TEST(SyncModel, SpeedupGrowsWithTheFastFabric) {
  auto t = default_topology();
  double prev = 0.0;
  for (double gbps : {50.0, 100.0, 400.0, 1600.0, 1e6}) {
    t.intra_bw_bytes_s = gbps_to_bytes_per_s(gbps);
    const double s = sync_speedup(t);
    EXPECT_GE(s, prev);
    prev = s;
  }
  EXPECT_NEAR(prev, t.rollout_gpus, 1e-3);  // infinite fabric: only the copy remains
}

TEST(SyncModel, TreeFanoutCostsMoreThanRing) {
  auto ring = default_topology();
  auto tree = default_topology();
  tree.tree_dissemination = true;
  EXPECT_GT(hierarchical_sync_time(tree), hierarchical_sync_time(ring));
  EXPECT_LT(hierarchical_sync_time(tree), flat_sync_time(tree));
}

TEST(SyncModel, OverheadShiftsBothPaths) {
  auto t = default_topology();
  const double f0 = flat_sync_time(t), h0 = hierarchical_sync_time(t);
  t.per_stream_overhead_s = 3.0;
  EXPECT_NEAR(flat_sync_time(t), f0 + 3.0, 1e-9);
  EXPECT_NEAR(hierarchical_sync_time(t), h0 + 3.0, 1e-9);
}

TEST(SyncModel, RejectsNonsenseTopologies) {
  auto t = default_topology();
  t.model_bytes = 0.0;
  EXPECT_THROW(flat_sync_time(t), std::invalid_argument);
  t = default_topology();
  t.rollout_gpus = 0;
  EXPECT_THROW(hierarchical_sync_time(t), std::invalid_argument);
  t = default_topology();
  t.cross_bw_bytes_s = -1.0;
  EXPECT_THROW(flat_sync_time(t), std::invalid_argument);
  t = default_topology();
  t.per_stream_overhead_s = -0.1;
  EXPECT_THROW(hierarchical_sync_time(t), std::invalid_argument);
}
