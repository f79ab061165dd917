#pragma once
// First-order byte accounting for refreshing rollout replicas with fresh
// weights.  The naive path drags one full copy per replica across the slow
// inter-cluster link; the two-stage path sends exactly one copy across and
// fans out on the fast intra-cluster fabric, overlapping the stages shard by
// shard.

#include <algorithm>
#include <stdexcept>

namespace rollmux {

inline constexpr double gbps_to_bytes_per_s(double gbps) { return gbps * 1e9 / 8.0; }

struct SyncTopology {
  double model_bytes = 0.0;
  int train_gpus = 8;    // shard holders on the training side
  int rollout_gpus = 8;  // replicas to refresh
  double cross_bw_bytes_s = gbps_to_bytes_per_s(20.0);
  double intra_bw_bytes_s = gbps_to_bytes_per_s(400.0);
  double per_stream_overhead_s = 0.0;
  bool tree_dissemination = false;  // ring is the bandwidth-optimal default

  void validate() const {
    if (!(model_bytes > 0.0)) throw std::invalid_argument("SyncTopology: model_bytes must be positive");
    if (train_gpus <= 0 || rollout_gpus <= 0)
      throw std::invalid_argument("SyncTopology: gpu counts must be positive");
    if (!(cross_bw_bytes_s > 0.0) || !(intra_bw_bytes_s > 0.0))
      throw std::invalid_argument("SyncTopology: bandwidths must be positive");
    if (per_stream_overhead_s < 0.0)
      throw std::invalid_argument("SyncTopology: overhead must be >= 0");
  }
};

// Every replica independently pulls the full model over the slow link.
inline double flat_cross_traffic_bytes(const SyncTopology& t) {
  return static_cast<double>(t.rollout_gpus) * t.model_bytes;
}

inline double flat_sync_time(const SyncTopology& t) {
  t.validate();
  return flat_cross_traffic_bytes(t) / t.cross_bw_bytes_s + t.per_stream_overhead_s;
}

// Scatter + broadcast moves exactly one copy across, whatever the fan-out.
inline double hierarchical_cross_traffic_bytes(const SyncTopology& t) { return t.model_bytes; }

inline double hierarchical_sync_time(const SyncTopology& t) {
  t.validate();
  const double scatter_s = t.model_bytes / t.cross_bw_bytes_s;
  const double ring_bytes =
      t.model_bytes * (t.rollout_gpus - 1) / static_cast<double>(t.rollout_gpus);
  double fanout_s = ring_bytes / t.intra_bw_bytes_s;
  if (t.tree_dissemination) {
    int rounds = 0;
    for (int holders = 1; holders < t.rollout_gpus; holders *= 2) ++rounds;
    fanout_s = rounds * t.model_bytes / t.intra_bw_bytes_s;
  }
  // the stages pipeline shard by shard: the shorter one only sticks out by
  // its first shard while the longer one fully hides the rest
  const double fill_s = std::min(scatter_s, fanout_s) / t.train_gpus;
  return std::max(scatter_s, fanout_s) + fill_s + t.per_stream_overhead_s;
}

inline double sync_speedup(const SyncTopology& t) {
  return flat_sync_time(t) / hierarchical_sync_time(t);
}

}  // namespace rollmux
