#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rollmux/domain.hpp"
#include "rollmux/rng.hpp"

// Intra-group scheduling: a cyclic round-robin over the group's jobs where
// each job runs one rollout and one training phase per meta-iteration.
// Rollout phases queue per node in a fixed order; training phases serialize
// across the whole training pool; a job's next rollout waits for its own
// previous training step (on-policy dependency).  Phases of one cycle spill
// into the next cycle's window, so the steady-state period — not the makespan
// of a single cycle — is what co-executed jobs experience per iteration.
namespace rollmux {

inline constexpr double kTimeEps = 1e-9;

struct GroupLoad {
  double cycle_s = 0.0;          // longest member's solo iteration
  double load_s = 0.0;           // max(train_load_s, max_node_load_s)
  double train_load_s = 0.0;     // total training work per cycle
  double max_node_load_s = 0.0;  // heaviest rollout node's work per cycle
};

inline GroupLoad group_load(const CoExecGroup& g) {
  if (g.jobs.empty()) throw std::invalid_argument("group_load: group has no jobs");
  if (g.jobs.size() != g.placements.size())
    throw std::invalid_argument("group_load: jobs and placements must pair up");
  GroupLoad ld;
  std::unordered_map<NodeId, double> node_load;
  for (std::size_t i = 0; i < g.jobs.size(); ++i) {
    const JobSpec& j = g.jobs[i];
    ld.cycle_s = std::max(ld.cycle_s, solo_time(j));
    ld.train_load_s += j.train.worst_case_s;
    for (NodeId n : g.placements[i].rollout_nodes) node_load[n] += j.rollout.worst_case_s;
  }
  for (const auto& [n, load] : node_load) ld.max_node_load_s = std::max(ld.max_node_load_s, load);
  ld.load_s = std::max(ld.train_load_s, ld.max_node_load_s);
  return ld;
}

// A group is saturated once the work per cycle on its bottleneck pool reaches
// the cycle itself: no bubble is left for another job.
inline bool is_saturated(const CoExecGroup& g) {
  const GroupLoad ld = group_load(g);
  return ld.load_s >= ld.cycle_s - kTimeEps;
}

// fixed dispatch order: longest solo iteration first, ties by job id
inline std::vector<std::size_t> round_robin_order(const std::vector<JobSpec>& jobs) {
  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = solo_time(jobs[a]);
    const double sb = solo_time(jobs[b]);
    if (sa != sb) return sa > sb;
    return jobs[a].id < jobs[b].id;
  });
  return order;
}

struct TailState {
  JobId job;
  double completed_fraction = 0.0;
  std::int64_t straggler_count = 0;
  std::vector<NodeId> consolidation_nodes;  // nodes currently hosting the phase
};

struct MigrationDecision {
  bool migrate = false;
  std::vector<NodeId> consolidation_nodes;  // where the stragglers keep decoding
  std::vector<NodeId> released_nodes;       // handed to the next queued rollout
};

// Decides whether a rollout phase that crossed the completion threshold
// should consolidate its stragglers.  Consolidation keeps
// ceil((1 - threshold) * nodes) nodes, at least one; if that frees nothing,
// migrating would only pay the pause, so it declines.
inline MigrationDecision maybe_migrate(const TailState& state, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("maybe_migrate: threshold must lie in (0, 1)");
  MigrationDecision d;
  if (state.completed_fraction + kTimeEps < threshold) return d;
  if (state.straggler_count <= 0) return d;
  const std::size_t total = state.consolidation_nodes.size();
  if (total < 2) return d;
  std::size_t keep = static_cast<std::size_t>(
      std::ceil((1.0 - threshold) * static_cast<double>(total)));
  keep = std::max<std::size_t>(keep, 1);
  if (keep >= total) return d;
  d.migrate = true;
  d.released_nodes.assign(state.consolidation_nodes.begin(),
                          state.consolidation_nodes.end() - static_cast<std::ptrdiff_t>(keep));
  d.consolidation_nodes.assign(state.consolidation_nodes.end() - static_cast<std::ptrdiff_t>(keep),
                               state.consolidation_nodes.end());
  return d;
}

// Steps a group one meta-iteration at a time.  Jobs may join or leave
// between cycles, which is how the replay layer models arrivals and lease
// expiry without restarting the group's clock.
class GroupEngine {
 public:
  struct Options {
    bool stochastic = false;
    bool migration = false;
    double migration_threshold = 0.8;
    double migration_pause_s = 5.0;
    int batch_size = 256;
    double sync_handoff_s = 0.0;
    std::uint64_t seed = 0;
  };

  struct JobInit {
    double ready_s = 0.0;  // no phase may start earlier (job arrival)
    std::uint64_t stream = 0;
    bool has_stream = false;
    int start_cycle = 0;
  };

  struct StepPhase {
    JobId job;
    int cycle = 0;
    double roll_start = 0.0;
    double roll_release = 0.0;   // nodes handed back (early under migration)
    double roll_complete = 0.0;  // last response done, incl. migration pause
    double roll_duration = 0.0;  // compute time, excl. pause
    double train_start = 0.0;
    double train_end = 0.0;
    bool migrated = false;
    double migrate_at = 0.0;
    std::vector<NodeId> consolidation_nodes;
    std::vector<NodeId> released_nodes;
  };

  GroupEngine(const CoExecGroup& g, const Options& opt) : opt_(opt) {
    if (!(opt_.batch_size > 0)) throw std::invalid_argument("GroupEngine: batch_size must be positive");
    for (const Node& n : g.train_pool) train_ids_.push_back(n.id);
    if (g.jobs.size() != g.placements.size())
      throw std::invalid_argument("GroupEngine: jobs and placements must pair up");
    for (std::size_t i = 0; i < g.jobs.size(); ++i) add_job(g.jobs[i], g.placements[i], JobInit{});
  }

  void add_job(const JobSpec& spec, const Placement& placement, const JobInit& init) {
    spec.validate();
    placement.validate();
    Rt rt;
    rt.spec = spec;
    rt.node_ids = placement.rollout_nodes;
    for (NodeId id : placement.rollout_nodes) {
      auto [it, inserted] = slot_of_.try_emplace(id, static_cast<int>(node_free_.size()));
      if (inserted) node_free_.push_back(0.0);
      rt.slots.push_back(it->second);
    }
    rt.prev_train_end = init.ready_s;
    rt.stream = init.has_stream ? init.stream : mix_seed({opt_.seed, fnv1a64(spec.id)});
    rt.cycle = init.start_cycle;
    const auto order_before = [&](const Rt& a, const Rt& b) {
      const double sa = solo_time(a.spec);
      const double sb = solo_time(b.spec);
      if (sa != sb) return sa > sb;
      return a.spec.id < b.spec.id;
    };
    auto pos = std::upper_bound(jobs_.begin(), jobs_.end(), rt, order_before);
    jobs_.insert(pos, std::move(rt));
    recompute_shares();
  }

  void remove_job(const JobId& id) {
    auto it = std::find_if(jobs_.begin(), jobs_.end(),
                           [&](const Rt& rt) { return rt.spec.id == id; });
    if (it == jobs_.end()) throw std::out_of_range("GroupEngine: job " + id + " not present");
    jobs_.erase(it);
    recompute_shares();
  }

  bool has_job(const JobId& id) const {
    return std::any_of(jobs_.begin(), jobs_.end(),
                       [&](const Rt& rt) { return rt.spec.id == id; });
  }

  std::size_t size() const { return jobs_.size(); }
  bool empty() const { return jobs_.empty(); }

  // earliest instant the next cycle's first rollout could begin
  double earliest_next_start() const {
    double best = std::numeric_limits<double>::infinity();
    for (const Rt& rt : jobs_) {
      double start = rt.prev_train_end;
      for (int s : rt.slots) start = std::max(start, node_free_[s]);
      best = std::min(best, start);
    }
    return best;
  }

  // when all dispatched work has left the pools
  double drain_time() const {
    double t = train_free_;
    for (double f : node_free_) t = std::max(t, f);
    return t;
  }

  const std::vector<StepPhase>& step() {
    if (jobs_.empty()) throw std::logic_error("GroupEngine::step: group has no jobs");
    scratch_.assign(jobs_.size(), StepPhase{});
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      Rt& rt = jobs_[i];
      StepPhase& ph = scratch_[i];
      ph.job = rt.spec.id;
      ph.cycle = rt.cycle;

      const double wc = rt.spec.rollout.worst_case_s;
      const double cap = rt.spec.tail.cap;
      double roll_dur = wc;
      double threshold_time = wc;
      double completed_fraction = 1.0;
      std::int64_t stragglers = 0;
      if (opt_.stochastic) {
        Rng rng(mix_seed({rt.stream, static_cast<std::uint64_t>(rt.cycle)}));
        lengths_.resize(static_cast<std::size_t>(opt_.batch_size));
        for (double& len : lengths_) len = rt.spec.tail.sample(rng);
        if (opt_.migration) {
          std::sort(lengths_.begin(), lengths_.end());
          const std::size_t idx = std::min<std::size_t>(
              lengths_.size() - 1,
              static_cast<std::size_t>(
                  std::ceil(opt_.migration_threshold * static_cast<double>(lengths_.size()))) - 1);
          const double len_thr = lengths_[idx];
          const auto done = static_cast<std::size_t>(
              std::upper_bound(lengths_.begin(), lengths_.end(), len_thr) - lengths_.begin());
          completed_fraction = static_cast<double>(done) / static_cast<double>(lengths_.size());
          stragglers = static_cast<std::int64_t>(lengths_.size() - done);
          threshold_time = wc * len_thr / cap;
          roll_dur = wc * lengths_.back() / cap;
        } else {
          roll_dur = wc * *std::max_element(lengths_.begin(), lengths_.end()) / cap;
        }
      }

      double start = rt.prev_train_end;
      for (int s : rt.slots) start = std::max(start, node_free_[s]);
      ph.roll_start = start;
      ph.roll_duration = roll_dur;
      double release = start + roll_dur;
      double complete = release;
      if (opt_.stochastic && opt_.migration && rt.shares_nodes &&
          threshold_time < roll_dur - kTimeEps) {
        TailState st{rt.spec.id, completed_fraction, stragglers, rt.node_ids};
        const MigrationDecision dec = maybe_migrate(st, opt_.migration_threshold);
        if (dec.migrate) {
          release = start + threshold_time;
          complete = start + roll_dur + opt_.migration_pause_s;
          ph.migrated = true;
          ph.migrate_at = release;
          ph.consolidation_nodes = dec.consolidation_nodes;
          ph.released_nodes = dec.released_nodes;
        }
      }
      ph.roll_release = release;
      ph.roll_complete = complete;
      for (int s : rt.slots) node_free_[s] = release;

      ph.train_start = std::max(complete + opt_.sync_handoff_s, train_free_);
      ph.train_end = ph.train_start + rt.spec.train.worst_case_s;
      train_free_ = ph.train_end;
      rt.prev_train_end = ph.train_end;
      rt.cycle += 1;
    }
    return scratch_;
  }

  struct MemberView {
    const JobSpec* spec;
    double prev_train_end;
    int cycle;
    double next_start;  // earliest instant this member's next rollout can begin
  };

  std::vector<MemberView> members() const {
    std::vector<MemberView> out;
    out.reserve(jobs_.size());
    for (const Rt& rt : jobs_) {
      double start = rt.prev_train_end;
      for (int s : rt.slots) start = std::max(start, node_free_[s]);
      out.push_back({&rt.spec, rt.prev_train_end, rt.cycle, start});
    }
    return out;
  }

  const std::vector<NodeId>& train_node_ids() const { return train_ids_; }

 private:
  struct Rt {
    JobSpec spec;
    std::vector<int> slots;
    std::vector<NodeId> node_ids;
    double prev_train_end = 0.0;
    std::uint64_t stream = 0;
    int cycle = 0;
    bool shares_nodes = false;
  };

  void recompute_shares() {
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      bool shares = false;
      for (std::size_t k = 0; k < jobs_.size() && !shares; ++k) {
        if (k == i) continue;
        for (int s : jobs_[i].slots) {
          if (std::find(jobs_[k].slots.begin(), jobs_[k].slots.end(), s) != jobs_[k].slots.end()) {
            shares = true;
            break;
          }
        }
      }
      jobs_[i].shares_nodes = shares;
    }
  }

  Options opt_;
  std::vector<Rt> jobs_;  // round-robin order
  std::vector<double> node_free_;
  std::unordered_map<NodeId, int> slot_of_;
  std::vector<NodeId> train_ids_;
  double train_free_ = 0.0;
  std::vector<StepPhase> scratch_;
  std::vector<double> lengths_;
};

namespace detail {

struct RatioEdge {
  int from = 0;
  int to = 0;
  double w = 0.0;  // event `to` happens at least w after `from`
  int shift = 0;   // how many cycle boundaries the edge crosses
};

// Largest weight-per-shift over all circuits, found by bisecting lambda and
// testing for a positive cycle after reducing each edge by lambda * shift.
inline double max_cycle_ratio(int n_events, const std::vector<RatioEdge>& edges, double lo,
                              double hi) {
  std::vector<double> pot(static_cast<std::size_t>(n_events));
  const auto has_positive_cycle = [&](double lambda) {
    std::fill(pot.begin(), pot.end(), 0.0);
    for (int pass = 0; pass <= n_events; ++pass) {
      bool updated = false;
      for (const auto& e : edges) {
        const double cand = pot[static_cast<std::size_t>(e.from)] + e.w - lambda * e.shift;
        if (cand > pot[static_cast<std::size_t>(e.to)] + 1e-12) {
          pot[static_cast<std::size_t>(e.to)] = cand;
          updated = true;
        }
      }
      if (!updated) return false;
    }
    return true;
  };
  for (int it = 0; it < 128 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (has_positive_cycle(mid)) lo = mid;
    else hi = mid;
  }
  return hi;
}

}  // namespace detail

// Exact steady-state period of the worst-case cyclic schedule.  Jobs pinned
// to one node each always run at max(longest solo iteration, bottleneck-pool
// load); placements that gang across partially shared node sets can
// serialize beyond both bounds, so those groups are solved as a timed event
// graph whose period is its maximum cycle ratio.
inline double steady_period_exact(const CoExecGroup& g, double sync_handoff_s = 0.0) {
  const std::size_t n = g.jobs.size();
  if (n == 0) throw std::invalid_argument("steady_period_exact: group has no jobs");
  if (g.placements.size() != n)
    throw std::invalid_argument("steady_period_exact: jobs and placements must pair up");

  const auto order = round_robin_order(g.jobs);
  double chain = 0.0, train_load = 0.0;
  std::unordered_map<NodeId, double> node_load;
  bool all_single = true;
  for (std::size_t i = 0; i < n; ++i) {
    chain = std::max(chain, solo_time(g.jobs[i]) + sync_handoff_s);
    train_load += g.jobs[i].train.worst_case_s;
    if (g.placements[i].rollout_nodes.size() != 1) all_single = false;
    for (NodeId nd : g.placements[i].rollout_nodes)
      node_load[nd] += g.jobs[i].rollout.worst_case_s;
  }
  double max_node = 0.0;
  for (const auto& [nd, load] : node_load) max_node = std::max(max_node, load);
  const double lo = std::max({chain, train_load, max_node});
  if (all_single) return lo;

  // events: rollout start = position, training start = n + position
  std::vector<detail::RatioEdge> edges;
  double total = 0.0;
  const auto add = [&](int from, int to, double w, int shift) {
    edges.push_back({from, to, w, shift});
    total += w;
  };
  std::unordered_map<NodeId, std::vector<int>> node_seq;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const JobSpec& j = g.jobs[order[pos]];
    const int r = static_cast<int>(pos);
    const int t = static_cast<int>(n + pos);
    add(r, t, j.rollout.worst_case_s + sync_handoff_s, 0);
    add(t, r, j.train.worst_case_s, 1);
    if (pos + 1 < n)
      add(t, static_cast<int>(n + pos + 1), j.train.worst_case_s, 0);
    else
      add(t, static_cast<int>(n), j.train.worst_case_s, 1);
    for (NodeId nd : g.placements[order[pos]].rollout_nodes) node_seq[nd].push_back(r);
  }
  for (const auto& [nd, seq] : node_seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const int next = seq[(i + 1) % seq.size()];
      const double w = g.jobs[order[static_cast<std::size_t>(seq[i])]].rollout.worst_case_s;
      add(seq[i], next, w, i + 1 == seq.size() ? 1 : 0);
    }
  }
  return detail::max_cycle_ratio(static_cast<int>(2 * n), edges, lo, total);
}

struct SteadyResult {
  double period_s = 0.0;
  int cycles_run = 0;
  bool converged = false;
};

// Simulation-side estimate: run the engine and average the cycle boundary
// advance over fixed windows until two consecutive windows agree.  Window
// averages ride out transient plateaus that fool per-cycle delta checks.
inline SteadyResult measure_steady_period(const CoExecGroup& g, double sync_handoff_s = 0.0,
                                          int window = 32, int max_cycles = 512,
                                          double rel_tol = 1e-9) {
  if (g.jobs.empty()) throw std::invalid_argument("measure_steady_period: group has no jobs");
  if (window < 1) throw std::invalid_argument("measure_steady_period: window must be >= 1");
  GroupEngine::Options opt;
  opt.sync_handoff_s = sync_handoff_s;
  GroupEngine eng(g, opt);
  SteadyResult res;
  double mark = 0.0;
  double prev_avg = -1.0;
  for (int c = 1; c <= max_cycles; ++c) {
    const auto& phases = eng.step();
    double boundary = 0.0;
    for (const auto& ph : phases) boundary = std::max(boundary, ph.train_end);
    res.cycles_run = c;
    if (c % window == 0) {
      const double avg = (boundary - mark) / window;
      mark = boundary;
      res.period_s = avg;
      if (prev_avg >= 0.0 && std::fabs(avg - prev_avg) <= rel_tol * std::max(1.0, avg)) {
        res.converged = true;
        return res;
      }
      prev_avg = avg;
    }
  }
  return res;
}

// Steady-state time between consecutive iteration completions of `job` when
// the whole group co-executes with worst-case phase durations.  The serial
// training pool couples every member, so the group shares one period; a job
// queued behind longer work sees its wait inside this number.
inline double estimate_coexec_time(const CoExecGroup& g, const JobId& job,
                                   double sync_handoff_s = 0.0) {
  if (g.find_job(job) == nullptr)
    throw std::out_of_range("estimate_coexec_time: job " + job + " not in group");
  return steady_period_exact(g, sync_handoff_s);
}

// Would every member of `g` plus the candidate still meet its slowdown bound
// if the candidate joined with this placement?  Planned placements may name
// nodes that are not provisioned yet; only timing is judged here.
inline bool slo_check(const CoExecGroup& g, const JobSpec& candidate, const Placement& p,
                      double sync_handoff_s = 0.0) {
  candidate.validate();
  p.validate();
  CoExecGroup probe = g;
  probe.jobs.push_back(candidate);
  probe.placements.push_back(p);
  const double period = steady_period_exact(probe, sync_handoff_s);
  for (const JobSpec& k : probe.jobs) {
    if (std::isinf(k.slo)) continue;
    if (period > k.slo * solo_time(k) * (1.0 + 1e-9)) return false;
  }
  return true;
}

// One steady-state meta-iteration, times shifted so the cycle's first event
// sits at zero.  Rollout rows end when their nodes come free; a cycle's
// trailing trains legitimately extend past cycle_time_s — they overlap the
// next cycle's rollouts on the other pool.
inline MetaIterationSchedule round_robin_schedule(const CoExecGroup& g,
                                                  double sync_handoff_s = 0.0) {
  g.validate();
  if (g.jobs.empty()) throw std::invalid_argument("round_robin_schedule: group has no jobs");
  const double period = steady_period_exact(g, sync_handoff_s);

  GroupEngine::Options opt;
  opt.sync_handoff_s = sync_handoff_s;
  GroupEngine eng(g, opt);
  const int warmup = measure_steady_period(g, sync_handoff_s).cycles_run;
  for (int c = 0; c < warmup; ++c) eng.step();
  const auto& phases = eng.step();

  double shift = std::numeric_limits<double>::infinity();
  for (const auto& ph : phases) shift = std::min(shift, ph.roll_start);

  MetaIterationSchedule sched;
  sched.cycle_time_s = period;
  for (const auto& ph : phases) {
    const Placement* p = g.find_placement(ph.job);
    PhaseExec roll;
    roll.job = ph.job;
    roll.pool = PoolRole::kRollout;
    roll.nodes = p->rollout_nodes;
    roll.start_s = ph.roll_start - shift;
    roll.end_s = ph.roll_release - shift;
    roll.cycle = 0;
    sched.phases.push_back(std::move(roll));

    PhaseExec train;
    train.job = ph.job;
    train.pool = PoolRole::kTraining;
    train.nodes = p->train_nodes;
    train.start_s = ph.train_start - shift;
    train.end_s = ph.train_end - shift;
    train.cycle = 0;
    sched.phases.push_back(std::move(train));
  }
  return sched;
}

struct RunOptions {
  bool stochastic = true;
  bool migration = false;
  double migration_threshold = 0.8;
  double migration_pause_s = 5.0;
  int batch_size = 256;
  double sync_handoff_s = 0.0;
};

struct MigrationRecord {
  JobId job;
  int cycle = 0;
  double at_s = 0.0;              // nodes released to the next queued rollout
  double stragglers_done_s = 0.0; // tail finished, incl. the migration pause
  std::vector<NodeId> consolidation_nodes;
  std::vector<NodeId> released_nodes;
};

struct MetaIterationRun {
  std::vector<MetaIterationSchedule> cycles;
  std::vector<MigrationRecord> migrations;
  std::map<JobId, double> mean_iteration_s;
  double rollout_makespan_s = 0.0;  // all responses of all rollout phases done
  double makespan_s = 0.0;
};

inline MetaIterationRun run_meta_iterations(const CoExecGroup& g, int n_cycles,
                                            std::uint64_t seed, const RunOptions& opt = {}) {
  if (n_cycles < 1) throw std::invalid_argument("run_meta_iterations: n_cycles must be >= 1");
  g.validate();
  if (g.jobs.empty()) throw std::invalid_argument("run_meta_iterations: group has no jobs");

  GroupEngine::Options eopt;
  eopt.stochastic = opt.stochastic;
  eopt.migration = opt.migration;
  eopt.migration_threshold = opt.migration_threshold;
  eopt.migration_pause_s = opt.migration_pause_s;
  eopt.batch_size = opt.batch_size;
  eopt.sync_handoff_s = opt.sync_handoff_s;
  eopt.seed = seed;
  GroupEngine eng(g, eopt);

  MetaIterationRun run;
  std::map<JobId, double> first_roll_start;
  std::map<JobId, double> last_train_end;
  double prev_boundary = 0.0;
  bool have_boundary = false;

  for (int c = 0; c < n_cycles; ++c) {
    const auto& phases = eng.step();
    MetaIterationSchedule sched;
    double boundary = 0.0;
    for (const auto& ph : phases) {
      const Placement* p = g.find_placement(ph.job);
      PhaseExec roll;
      roll.job = ph.job;
      roll.pool = PoolRole::kRollout;
      roll.nodes = p->rollout_nodes;
      roll.start_s = ph.roll_start;
      roll.end_s = ph.roll_release;
      roll.cycle = c;
      roll.migrated = ph.migrated;
      sched.phases.push_back(std::move(roll));

      PhaseExec train;
      train.job = ph.job;
      train.pool = PoolRole::kTraining;
      train.nodes = p->train_nodes;
      train.start_s = ph.train_start;
      train.end_s = ph.train_end;
      train.cycle = c;
      sched.phases.push_back(std::move(train));

      if (ph.migrated) {
        MigrationRecord rec;
        rec.job = ph.job;
        rec.cycle = c;
        rec.at_s = ph.migrate_at;
        rec.stragglers_done_s = ph.roll_complete;
        rec.consolidation_nodes = ph.consolidation_nodes;
        rec.released_nodes = ph.released_nodes;
        run.migrations.push_back(std::move(rec));
      }

      first_roll_start.try_emplace(ph.job, ph.roll_start);
      last_train_end[ph.job] = ph.train_end;
      boundary = std::max(boundary, ph.train_end);
      run.rollout_makespan_s = std::max({run.rollout_makespan_s, ph.roll_release, ph.roll_complete});
      run.makespan_s = std::max({run.makespan_s, ph.train_end, ph.roll_complete});
    }
    sched.cycle_time_s = have_boundary ? boundary - prev_boundary : boundary;
    prev_boundary = boundary;
    have_boundary = true;
    run.cycles.push_back(std::move(sched));
  }

  for (const auto& [job, te] : last_train_end)
    run.mean_iteration_s[job] = (te - first_roll_start[job]) / static_cast<double>(n_cycles);
  return run;
}

// Utilization delta of running one extra iteration of `repeated` inside an
// otherwise round-robin cycle, per the closed form
//   dU = T_k (T_1 - sum_j T_j) / (T_1 (T_1 + T_k)),
// never positive because the longest member's solo time bounds the cycle.
inline double verify_repetition_suboptimal(const CoExecGroup& g, const JobId& repeated) {
  const JobSpec* k = g.find_job(repeated);
  if (k == nullptr)
    throw std::out_of_range("verify_repetition_suboptimal: job " + repeated + " not in group");
  const GroupLoad ld = group_load(g);
  if (ld.load_s > ld.cycle_s + kTimeEps)
    throw std::domain_error(
        "verify_repetition_suboptimal: group is overloaded; the bound assumes a "
        "bubble-limited cycle");
  double sum_solo = 0.0;
  for (const JobSpec& j : g.jobs) sum_solo += solo_time(j);
  const double t1 = ld.cycle_s;
  const double tk = solo_time(*k);
  return tk * (t1 - sum_solo) / (t1 * (t1 + tk));
}

}  // namespace rollmux
