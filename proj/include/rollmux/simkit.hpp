#pragma once
// Synthetic workload generation and whole-cluster trace replay.  The replay
// is a discrete-event loop over three event kinds — group dispatches, group
// decommissions, job arrivals — and is deterministic for a fixed
// (trace, policy, config, seed) tuple.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rollmux/baselines.hpp"
#include "rollmux/cluster.hpp"
#include "rollmux/cost.hpp"
#include "rollmux/domain.hpp"
#include "rollmux/inter.hpp"
#include "rollmux/intra.hpp"
#include "rollmux/rng.hpp"

namespace rollmux {

enum class PolicyKind { kRollMux, kRandom, kGreedy, kSoloDisagg, kOptimal };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kRollMux: return "rollmux";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kSoloDisagg: return "solo";
    case PolicyKind::kOptimal: return "optimal";
  }
  return "unknown";
}

inline PolicyKind parse_policy(const std::string& name) {
  for (PolicyKind p : {PolicyKind::kRollMux, PolicyKind::kRandom, PolicyKind::kGreedy,
                       PolicyKind::kSoloDisagg, PolicyKind::kOptimal})
    if (name == to_string(p)) return p;
  throw std::invalid_argument("unknown policy '" + name +
                              "'; valid: rollmux, random, greedy, solo, optimal");
}

// ---------------------------------------------------------------------------
// Workload profiles.

enum class MixKind { kBalanced, kRolloutHeavy, kTrainHeavy, kMixed };

inline const char* to_string(MixKind m) {
  switch (m) {
    case MixKind::kBalanced: return "bl";
    case MixKind::kRolloutHeavy: return "rh";
    case MixKind::kTrainHeavy: return "th";
    case MixKind::kMixed: return "mixed";
  }
  return "unknown";
}

inline MixKind parse_mix(const std::string& name) {
  for (MixKind m :
       {MixKind::kBalanced, MixKind::kRolloutHeavy, MixKind::kTrainHeavy, MixKind::kMixed})
    if (name == to_string(m)) return m;
  throw std::invalid_argument("unknown mix '" + name + "'; valid: bl, rh, th, mixed");
}

enum class SizeClass { kSmall, kMedium, kLarge };

struct PhaseRanges {
  double roll_lo, roll_hi;
  double train_lo, train_hi;
};

inline PhaseRanges phase_ranges(MixKind mix, SizeClass size) {
  const int s = static_cast<int>(size);
  switch (mix) {
    case MixKind::kBalanced: {
      static constexpr PhaseRanges t[3] = {
          {50, 100, 50, 100}, {100, 200, 100, 200}, {200, 300, 200, 300}};
      return t[s];
    }
    case MixKind::kRolloutHeavy: {
      static constexpr PhaseRanges t[3] = {
          {100, 200, 25, 50}, {200, 400, 50, 100}, {400, 600, 100, 200}};
      return t[s];
    }
    case MixKind::kTrainHeavy: {
      static constexpr PhaseRanges t[3] = {
          {25, 50, 100, 200}, {50, 100, 200, 400}, {100, 200, 400, 600}};
      return t[s];
    }
    case MixKind::kMixed: break;
  }
  throw std::invalid_argument("phase_ranges: pick a concrete profile, not the mixed bag");
}

// per-node state that has to stay cached for a warm start, by model size
struct SizeFootprint {
  double roll_mem_gb;
  double train_mem_gb;
};

inline SizeFootprint size_footprint(SizeClass size) {
  static constexpr SizeFootprint t[3] = {{113.4, 156.2}, {275.7, 240.0}, {445.4, 456.1}};
  return t[static_cast<int>(size)];
}

// ---------------------------------------------------------------------------
// Trace generation.

struct TraceGenConfig {
  int n_jobs = 300;
  MixKind mix = MixKind::kMixed;
  double slo_fixed = 0.0;           // 0 draws each job's bound from Unif(1, 2)
  double arrival_rate_per_h = 0.5;  // Poisson arrivals
  std::vector<double> arrival_times_s;  // non-empty: replay these instead
  double duration_mean_h = 14.4;
  double duration_sigma = 0.6;  // lognormal spread of job lifetimes
  double max_tokens = 8192.0;
  double tail_sigma = 0.8;
  double tail_cap_fraction = 0.05;  // share of responses pinned at the cap
  std::uint64_t seed = 0;
};

inline std::vector<JobSpec> generate_trace(const TraceGenConfig& cfg) {
  if (cfg.n_jobs < 1) throw std::invalid_argument("generate_trace: need at least one job");
  if (cfg.slo_fixed != 0.0 && cfg.slo_fixed < 1.0)
    throw std::invalid_argument("generate_trace: a fixed slo must be >= 1");
  if (!cfg.arrival_times_s.empty() &&
      cfg.arrival_times_s.size() < static_cast<std::size_t>(cfg.n_jobs))
    throw std::invalid_argument("generate_trace: fewer replayed arrivals than jobs");

  // one substream per field family: changing one knob never reshuffles others
  enum : std::uint64_t { kClass = 1, kRoll, kTrain, kSlo, kArrival, kDuration };
  const double tail_mu =
      lognormal_mu_for_cap_fraction(cfg.max_tokens, cfg.tail_sigma, cfg.tail_cap_fraction);
  const double dur_mu =
      std::log(cfg.duration_mean_h * 3600.0) - 0.5 * cfg.duration_sigma * cfg.duration_sigma;

  int width = 1;
  for (int v = cfg.n_jobs - 1; v >= 10; v /= 10) ++width;

  std::vector<JobSpec> jobs;
  double arrival = 0.0;
  for (int j = 0; j < cfg.n_jobs; ++j) {
    const auto uj = static_cast<std::uint64_t>(j);
    Rng class_rng(mix_seed({cfg.seed, kClass, uj}));
    MixKind mix = cfg.mix;
    SizeClass size;
    if (mix == MixKind::kMixed) {
      const auto pick = class_rng.uniform_u64(9);
      mix = static_cast<MixKind>(pick / 3);
      size = static_cast<SizeClass>(pick % 3);
    } else {
      size = static_cast<SizeClass>(class_rng.uniform_u64(3));
    }
    const PhaseRanges pr = phase_ranges(mix, size);
    const SizeFootprint fp = size_footprint(size);

    JobSpec job;
    std::string num = std::to_string(j);
    job.id = "job-" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    job.rollout.worst_case_s = Rng(mix_seed({cfg.seed, kRoll, uj})).uniform(pr.roll_lo, pr.roll_hi);
    job.train.worst_case_s =
        Rng(mix_seed({cfg.seed, kTrain, uj})).uniform(pr.train_lo, pr.train_hi);
    job.rollout.gpus = 8;
    job.train.gpus = 8;
    job.rollout.mem_gb = fp.roll_mem_gb;
    job.train.mem_gb = fp.train_mem_gb;
    job.slo =
        cfg.slo_fixed > 0.0 ? cfg.slo_fixed : Rng(mix_seed({cfg.seed, kSlo, uj})).uniform(1.0, 2.0);
    if (!cfg.arrival_times_s.empty())
      arrival = cfg.arrival_times_s[static_cast<std::size_t>(j)];
    else if (j > 0)
      arrival += Rng(mix_seed({cfg.seed, kArrival, uj})).exponential(cfg.arrival_rate_per_h / 3600.0);
    job.arrival_s = arrival;
    job.duration_s =
        std::exp(dur_mu + cfg.duration_sigma * Rng(mix_seed({cfg.seed, kDuration, uj})).normal());
    job.max_tokens = cfg.max_tokens;
    job.tail.family = TailFamily::kLognormalTruncated;
    job.tail.mu = tail_mu;
    job.tail.sigma = cfg.tail_sigma;
    job.tail.cap = cfg.max_tokens;
    job.validate();
    jobs.push_back(std::move(job));
  }
  std::sort(jobs.begin(), jobs.end(), [](const JobSpec& a, const JobSpec& b) {
    return a.arrival_s != b.arrival_s ? a.arrival_s < b.arrival_s : a.id < b.id;
  });
  return jobs;
}

// ---------------------------------------------------------------------------
// Replay.

struct ReplayOptions {
  bool stochastic = false;  // sample response tails instead of worst case
  bool migration = false;   // consolidate stragglers (stochastic only)
  bool record_latency = false;
};

struct TimePoint {
  double t_s = 0.0;
  int rollout_gpus = 0;
  int train_gpus = 0;
  double cost_per_h = 0.0;
};

struct JobOutcome {
  JobId id;
  StrategyKind strategy = StrategyKind::kRejected;
  GroupId group = -1;
  int cycles = 0;
  double first_start_s = 0.0;
  double last_end_s = 0.0;
  double slowdown = std::numeric_limits<double>::infinity();
  bool slo_met = false;
  bool rejected = true;
};

struct SimReport {
  std::vector<TimePoint> series;
  std::vector<JobOutcome> jobs;
  std::vector<ScheduleDecision> decisions;
  double total_cost_usd = 0.0;  // integral of the cost-rate series
  double group_cost_usd = 0.0;  // independent per-group lifetime accounting
  double makespan_s = 0.0;
  double slo_attainment = 1.0;
  int rejected_jobs = 0;
  int peak_rollout_gpus = 0;
  int peak_train_gpus = 0;
  AuditReport final_audit;
};

inline SimReport replay(const std::vector<JobSpec>& trace, PolicyKind policy,
                        const ClusterConfig& cfg, std::uint64_t seed,
                        const ReplayOptions& opt = {}) {
  cfg.validate();
  {
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (i > 0 && trace[i].arrival_s < trace[i - 1].arrival_s)
        throw std::invalid_argument("replay: trace must be sorted by arrival");
      if (!ids.insert(trace[i].id).second)
        throw std::invalid_argument("replay: duplicate job id '" + trace[i].id + "'");
    }
  }

  SimReport rep;
  rep.jobs.reserve(trace.size());
  std::unordered_map<JobId, std::size_t> outcome_of;
  std::unordered_map<JobId, double> lease_end;
  for (const JobSpec& j : trace) {
    outcome_of.emplace(j.id, rep.jobs.size());
    rep.jobs.push_back(JobOutcome{j.id, StrategyKind::kRejected, -1, 0, 0, 0,
                                  std::numeric_limits<double>::infinity(), false, true});
    lease_end.emplace(j.id, j.arrival_s + j.duration_s);
  }

  ClusterState st;
  st.cfg = cfg;
  std::map<GroupId, GroupEngine> engines;
  GroupEngine::Options eng_opt;
  eng_opt.stochastic = opt.stochastic;
  eng_opt.migration = opt.migration;
  eng_opt.migration_threshold = cfg.migration_threshold;
  eng_opt.migration_pause_s = cfg.migration_pause_s;
  eng_opt.sync_handoff_s = cfg.sync_handoff_s;
  eng_opt.seed = seed;

  Rng policy_rng(mix_seed({seed, 0x706c616365ULL}));

  // the clairvoyant policy fixes its grouping before the first arrival
  struct OptSlot {
    int block = -1;
    int bin = -1;
  };
  struct OptLive {
    GroupId gid = -1;
    std::vector<NodeId> bin_nodes;
    std::vector<NodeId> train_nodes;
  };
  std::unordered_map<JobId, OptSlot> opt_slot;
  std::vector<OptimalGroupPlan> opt_blocks;
  std::vector<OptLive> opt_live;
  if (policy == PolicyKind::kOptimal) {
    if (trace.size() > static_cast<std::size_t>(cfg.optimal_max_jobs))
      throw std::invalid_argument(
          "replay: the exact policy is intractable beyond " + std::to_string(cfg.optimal_max_jobs) +
          " jobs (this trace has " + std::to_string(trace.size()) +
          "); use the windowed bound or a heuristic policy");
    OptimalPlan plan = offline_optimal(trace, cfg);
    opt_blocks = std::move(plan.groups);
    opt_live.resize(opt_blocks.size());
    for (std::size_t b = 0; b < opt_blocks.size(); ++b)
      for (std::size_t k = 0; k < opt_blocks[b].jobs.size(); ++k)
        opt_slot[opt_blocks[b].jobs[k]] = {static_cast<int>(b), opt_blocks[b].node_of_job[k]};
  }

  // two independent ledgers for the same dollars
  struct GroupBill {
    double anchor_s = 0.0;
    double rate_per_h = 0.0;
  };
  std::map<GroupId, GroupBill> bills;

  double last_event_s = 0.0;
  const auto emit = [&](double t) {
    TimePoint pt{t, st.total_gpus(PoolRole::kRollout), st.total_gpus(PoolRole::kTraining),
                 st.cost_rate_per_h()};
    rep.peak_rollout_gpus = std::max(rep.peak_rollout_gpus, pt.rollout_gpus);
    rep.peak_train_gpus = std::max(rep.peak_train_gpus, pt.train_gpus);
    rep.series.push_back(pt);
    last_event_s = std::max(last_event_s, t);
  };
  emit(0.0);

  const auto decide = [&](const JobSpec& job) -> ScheduleDecision {
    switch (policy) {
      case PolicyKind::kRollMux: return schedule_job(st, job, opt.record_latency);
      case PolicyKind::kRandom: return random_place(st, job, policy_rng);
      case PolicyKind::kGreedy: return greedy_place(st, job);
      case PolicyKind::kSoloDisagg: {
        ScheduleDecision d;
        d.job = job.id;
        const PlacementCandidate iso = isolated_candidate(st, job);
        d.candidates_evaluated = 1;
        if (memory_feasible(st, nullptr, job, iso)) {
          d.strategy = StrategyKind::kIsolated;
          d.delta_cost_per_h = iso.delta_cost_per_h;
          d.plan = to_plan(iso);
        }
        return d;
      }
      case PolicyKind::kOptimal: {
        ScheduleDecision d;
        d.job = job.id;
        d.candidates_evaluated = 1;
        const OptSlot slot = opt_slot.at(job.id);
        OptLive& live = opt_live[static_cast<std::size_t>(slot.block)];
        const OptimalGroupPlan& blk = opt_blocks[static_cast<std::size_t>(slot.block)];
        AdmissionPlan p;
        p.placement.job = job.id;
        if (live.gid < 0 || st.find_group(live.gid) == nullptr) {
          // first member (or the block went idle and was torn down): provision
          // the block's whole footprint fresh
          p.strategy = StrategyKind::kIsolated;
          p.first_new_node_id = st.next_node_id;
          p.new_rollout_nodes = blk.rollout_nodes;
          p.new_train_nodes = blk.train_nodes;
          live.bin_nodes.clear();
          live.train_nodes.clear();
          for (int i = 0; i < blk.rollout_nodes; ++i) live.bin_nodes.push_back(st.next_node_id + i);
          for (int i = 0; i < blk.train_nodes; ++i)
            live.train_nodes.push_back(st.next_node_id + blk.rollout_nodes + i);
          p.delta_cost_per_h = blk.cost_rate_per_h;
        } else {
          p.strategy = StrategyKind::kDirectPacking;
          p.group = live.gid;
        }
        p.placement.rollout_nodes = {live.bin_nodes.at(static_cast<std::size_t>(slot.bin))};
        p.placement.train_nodes = live.train_nodes;
        d.strategy = p.strategy;
        d.group = p.group;
        d.delta_cost_per_h = p.delta_cost_per_h;
        d.plan = std::move(p);
        return d;
      }
    }
    throw std::logic_error("replay: unhandled policy");
  };

  const auto admit = [&](const JobSpec& job, double t) {
    ScheduleDecision d = decide(job);
    rep.decisions.push_back(d);
    JobOutcome& out = rep.jobs[outcome_of.at(job.id)];
    if (d.strategy == StrategyKind::kRejected) {
      ++rep.rejected_jobs;
      return;
    }
    const GroupId gid = apply_admission(st, job, d.plan, t);
    if (policy == PolicyKind::kOptimal)
      opt_live[static_cast<std::size_t>(opt_slot.at(job.id).block)].gid = gid;
    out.strategy = d.strategy;
    out.group = gid;
    out.rejected = false;

    const double rate = group_cost(*st.find_group(gid)).total_per_h();
    auto [bill, fresh] = bills.try_emplace(gid, GroupBill{t, rate});
    if (!fresh) {
      rep.group_cost_usd += bill->second.rate_per_h * (t - bill->second.anchor_s) / 3600.0;
      bill->second = {t, rate};
    }

    auto eng = engines.find(gid);
    if (eng == engines.end()) {
      CoExecGroup shell = *st.find_group(gid);
      shell.jobs.clear();
      shell.placements.clear();
      eng = engines.emplace(gid, GroupEngine(shell, eng_opt)).first;
    }
    eng->second.add_job(job, d.plan.placement, {.ready_s = t});
    emit(t);
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::size_t next_arrival = 0;
  while (true) {
    double t_dispatch = inf, t_decomm = inf;
    GroupId g_dispatch = -1, g_decomm = -1;
    for (const auto& [gid, eng] : engines) {
      if (eng.empty()) {
        if (eng.drain_time() < t_decomm) {
          t_decomm = eng.drain_time();
          g_decomm = gid;
        }
      } else if (eng.earliest_next_start() < t_dispatch) {
        t_dispatch = eng.earliest_next_start();
        g_dispatch = gid;
      }
    }
    const double t_arrive = next_arrival < trace.size() ? trace[next_arrival].arrival_s : inf;
    if (t_dispatch == inf && t_decomm == inf && t_arrive == inf) break;

    if (t_dispatch <= t_decomm && t_dispatch <= t_arrive) {
      GroupEngine& eng = engines.at(g_dispatch);
      std::vector<JobId> leavers;
      for (const auto& m : eng.members())
        if (m.next_start >= lease_end.at(m.spec->id) - kTimeEps) leavers.push_back(m.spec->id);
      for (const JobId& id : leavers) {
        eng.remove_job(id);
        remove_job(st, g_dispatch, id);
      }
      if (!eng.empty()) {
        for (const auto& ph : eng.step()) {
          JobOutcome& out = rep.jobs[outcome_of.at(ph.job)];
          if (out.cycles == 0) out.first_start_s = ph.roll_start;
          out.last_end_s = ph.train_end;
          ++out.cycles;
        }
      }
      continue;
    }
    if (t_decomm <= t_arrive) {
      decommission_group(st, g_decomm);
      engines.erase(g_decomm);
      const GroupBill bill = bills.at(g_decomm);
      bills.erase(g_decomm);
      rep.group_cost_usd += bill.rate_per_h * (t_decomm - bill.anchor_s) / 3600.0;
      emit(t_decomm);
      continue;
    }
    const JobSpec& job = trace[next_arrival++];
    admit(job, job.arrival_s);
  }

  rep.makespan_s = last_event_s;
  for (std::size_t i = 0; i + 1 < rep.series.size(); ++i)
    rep.total_cost_usd +=
        rep.series[i].cost_per_h * (rep.series[i + 1].t_s - rep.series[i].t_s) / 3600.0;

  int met = 0;
  for (JobOutcome& out : rep.jobs) {
    const JobSpec& spec = trace[outcome_of.at(out.id)];
    if (!out.rejected && out.cycles > 0) {
      out.slowdown = (out.last_end_s - out.first_start_s) / (out.cycles * solo_time(spec));
      out.slo_met = out.slowdown <= spec.slo * (1.0 + kTimeEps);
    }
    met += out.slo_met;
  }
  rep.slo_attainment = trace.empty() ? 1.0 : static_cast<double>(met) / trace.size();

  rep.final_audit = audit_cluster(st);
  if (!st.groups.empty())
    rep.final_audit.violations.push_back("replay left " + std::to_string(st.groups.size()) +
                                         " groups provisioned after the last departure");
  return rep;
}

// ---------------------------------------------------------------------------
// Sensitivity sweeps.

struct SweepCell {
  std::string sweep;
  std::string setting;
  PolicyKind policy = PolicyKind::kRollMux;
  int n_jobs = 0;
  double total_cost_usd = 0.0;
  double optimal_bound_usd = 0.0;
  double slo_attainment = 1.0;
  int rejected_jobs = 0;
};

struct SensitivityOptions {
  TraceGenConfig base;  // mixed workload, heterogeneous bounds by default
  ClusterConfig cfg;
  std::vector<PolicyKind> policies = {PolicyKind::kRollMux, PolicyKind::kRandom,
                                      PolicyKind::kGreedy};
  ReplayOptions replay;
  int threads = 1;
};

inline std::vector<SweepCell> sensitivity_suite(const SensitivityOptions& so) {
  struct Task {
    std::string sweep;
    std::string setting;
    TraceGenConfig gen;
    ClusterConfig cfg;
    PolicyKind policy;
  };
  std::vector<Task> tasks;
  const auto add_setting = [&](const std::string& sweep, const std::string& setting,
                               const TraceGenConfig& gen, const ClusterConfig& cfg) {
    for (PolicyKind p : so.policies) tasks.push_back({sweep, setting, gen, cfg, p});
  };

  for (MixKind mix :
       {MixKind::kBalanced, MixKind::kRolloutHeavy, MixKind::kTrainHeavy, MixKind::kMixed}) {
    TraceGenConfig gen = so.base;
    gen.mix = mix;
    add_setting("mix", to_string(mix), gen, so.cfg);
  }
  for (double slo : {1.2, 1.5, 2.0, 0.0}) {
    TraceGenConfig gen = so.base;
    gen.slo_fixed = slo;
    add_setting("slo", slo == 0.0 ? "unif(1,2)" : std::to_string(slo).substr(0, 3), gen, so.cfg);
  }
  for (int residency : {2, 3, 4, 5}) {
    ClusterConfig cfg = so.cfg;
    cfg.max_group_residency = residency;
    add_setting("residency", std::to_string(residency), so.base, cfg);
  }

  std::vector<SweepCell> cells(tasks.size());
  const auto run_task = [&](std::size_t i) {
    const Task& tk = tasks[i];
    const auto trace = generate_trace(tk.gen);
    const SimReport rep = replay(trace, tk.policy, tk.cfg, tk.gen.seed, so.replay);
    SweepCell& c = cells[i];
    c.sweep = tk.sweep;
    c.setting = tk.setting;
    c.policy = tk.policy;
    c.n_jobs = static_cast<int>(trace.size());
    c.total_cost_usd = rep.total_cost_usd;
    c.optimal_bound_usd = optimal_cost_bound(trace, tk.cfg);
    c.slo_attainment = rep.slo_attainment;
    c.rejected_jobs = rep.rejected_jobs;
    if (!rep.final_audit.ok())
      throw std::runtime_error("sensitivity_suite: auditor failed on " + tk.sweep + "/" +
                               tk.setting + "/" + to_string(tk.policy) + ": " +
                               rep.final_audit.violations.front());
  };

  const int threads = std::max(1, so.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size();
               i += static_cast<std::size_t>(threads))
            run_task(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return cells;
}

}  // namespace rollmux
