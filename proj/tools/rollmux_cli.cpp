// Command-line front end: generate synthetic traces, replay them under a
// placement policy, run the sensitivity sweeps, and price parameter syncs.
// Every artifact is deterministic for a fixed command line, so reruns are
// byte-identical and diffable.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rollmux/baselines.hpp"
#include "rollmux/simkit.hpp"
#include "rollmux/syncmodel.hpp"
#include "rollmux/trace_io.hpp"

namespace {

using namespace rollmux;

// shortest round-trip formatting, same as the JSON artifacts use
std::string fmt(double v) { return ordered_json(v).dump(); }

ClusterConfig load_config(const std::string& path) {
  return path.empty() ? ClusterConfig{} : read_cluster_config(path);
}

ordered_json summary_json(PolicyKind policy, std::uint64_t seed, const SimReport& rep) {
  ordered_json jobs = ordered_json::array();
  for (const JobOutcome& out : rep.jobs)
    jobs.push_back({{"id", out.id},
                    {"strategy", to_string(out.strategy)},
                    {"group", out.group},
                    {"cycles", out.cycles},
                    {"slowdown", out.slowdown},
                    {"slo_met", out.slo_met},
                    {"rejected", out.rejected}});
  return ordered_json{{"policy", to_string(policy)},
                      {"seed", seed},
                      {"n_jobs", rep.jobs.size()},
                      {"total_cost_usd", rep.total_cost_usd},
                      {"group_cost_usd", rep.group_cost_usd},
                      {"makespan_s", rep.makespan_s},
                      {"slo_attainment", rep.slo_attainment},
                      {"rejected_jobs", rep.rejected_jobs},
                      {"peak_rollout_gpus", rep.peak_rollout_gpus},
                      {"peak_train_gpus", rep.peak_train_gpus},
                      {"audit_ok", rep.final_audit.ok()},
                      {"audit_violations", rep.final_audit.violations},
                      {"jobs", jobs}};
}

std::string timeseries_csv(const SimReport& rep) {
  std::string out = "# rollmux-timeseries-v1\nt_s,rollout_gpus,train_gpus,cost_per_h\n";
  for (const TimePoint& pt : rep.series) {
    out += fmt(pt.t_s);
    out += ',';
    out += std::to_string(pt.rollout_gpus);
    out += ',';
    out += std::to_string(pt.train_gpus);
    out += ',';
    out += fmt(pt.cost_per_h);
    out += '\n';
  }
  return out;
}

std::string decisions_jsonl(const SimReport& rep) {
  std::string out;
  for (const ScheduleDecision& d : rep.decisions) {
    out += ordered_json{{"job", d.job},
                        {"strategy", to_string(d.strategy)},
                        {"group", d.group},
                        {"delta_cost_per_h", d.delta_cost_per_h},
                        {"candidates_evaluated", d.candidates_evaluated}}
               .dump();
    out += '\n';
  }
  return out;
}

struct SimulateArgs {
  std::string trace_path;
  std::string policy = "rollmux";
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool stochastic = false;
  bool migration = false;
  bool log_latency = false;
};

int run_simulate(const SimulateArgs& a, bool audit_only) {
  const auto trace = read_trace(a.trace_path);
  const PolicyKind policy = parse_policy(a.policy);
  const ClusterConfig cfg = load_config(a.config_path);
  ReplayOptions opt;
  opt.stochastic = a.stochastic;
  opt.migration = a.migration;
  opt.record_latency = a.log_latency;
  const SimReport rep = replay(trace, policy, cfg, a.seed, opt);

  if (a.log_latency && !rep.decisions.empty()) {
    double total_us = 0.0, max_us = 0.0;
    for (const ScheduleDecision& d : rep.decisions) {
      total_us += static_cast<double>(d.latency_us);
      max_us = std::max(max_us, static_cast<double>(d.latency_us));
    }
    std::cerr << "decision latency: mean " << fmt(total_us / rep.decisions.size()) << " us, max "
              << fmt(max_us) << " us\n";
  }

  if (!audit_only) {
    std::filesystem::create_directories(a.out_dir);
    const auto in_dir = [&](const char* name) { return (std::filesystem::path(a.out_dir) / name).string(); };
    write_text_file(in_dir("summary.json"), summary_json(policy, a.seed, rep).dump(2) + "\n");
    write_text_file(in_dir("timeseries.csv"), timeseries_csv(rep));
    write_text_file(in_dir("decisions.jsonl"), decisions_jsonl(rep));
    const ordered_json manifest{{"command", "simulate"},
                                {"trace", a.trace_path},
                                {"trace_fingerprint", fnv1a64(trace_to_jsonl(trace))},
                                {"policy", to_string(policy)},
                                {"seed", a.seed},
                                {"stochastic", a.stochastic},
                                {"migration", a.migration},
                                {"cluster_config", cluster_config_to_json(cfg)}};
    write_text_file(in_dir("manifest.json"), manifest.dump(2) + "\n");
  }

  std::cout << "policy " << to_string(policy) << ": " << trace.size() << " jobs, total "
            << fmt(rep.total_cost_usd) << " $, attainment " << fmt(rep.slo_attainment)
            << ", rejected " << rep.rejected_jobs << "\n";
  if (!rep.final_audit.ok()) {
    for (const std::string& v : rep.final_audit.violations) std::cerr << "audit: " << v << "\n";
    return 2;
  }
  if (audit_only) std::cout << "audit clean\n";
  return 0;
}

struct GenTraceArgs {
  std::string out_path;
  std::string mix = "mixed";
  std::string slo = "unif";
  std::string arrivals_from;
  int jobs = 300;
  std::uint64_t seed = 0;
  double arrival_rate_per_h = 0.5;
  double duration_mean_h = 14.4;
  double duration_sigma = 0.6;
};

int run_gen_trace(const GenTraceArgs& a) {
  TraceGenConfig gen;
  gen.n_jobs = a.jobs;
  gen.mix = parse_mix(a.mix);
  if (a.slo != "unif") gen.slo_fixed = std::stod(a.slo);
  gen.arrival_rate_per_h = a.arrival_rate_per_h;
  gen.duration_mean_h = a.duration_mean_h;
  gen.duration_sigma = a.duration_sigma;
  gen.seed = a.seed;
  if (!a.arrivals_from.empty())
    for (const JobSpec& j : read_trace(a.arrivals_from))
      gen.arrival_times_s.push_back(j.arrival_s);
  const auto trace = generate_trace(gen);
  write_trace(a.out_path, trace);
  std::cout << "wrote " << trace.size() << " jobs to " << a.out_path << "\n";
  return 0;
}

struct SweepArgs {
  std::string out_dir;
  std::string policies = "rollmux,random,greedy";
  std::string config_path;
  int jobs = 300;
  std::uint64_t seed = 0;
  int threads = 1;
};

int run_sweep(const SweepArgs& a) {
  SensitivityOptions so;
  so.base.n_jobs = a.jobs;
  so.base.seed = a.seed;
  so.cfg = load_config(a.config_path);
  so.threads = a.threads;
  so.policies.clear();
  std::stringstream names(a.policies);
  for (std::string name; std::getline(names, name, ',');)
    so.policies.push_back(parse_policy(name));
  if (so.policies.empty()) throw std::invalid_argument("sweep: no policies given");

  const auto cells = sensitivity_suite(so);
  std::string csv =
      "# rollmux-sweep-v1\n"
      "sweep,setting,policy,n_jobs,total_cost_usd,optimal_bound_usd,cost_vs_bound,"
      "slo_attainment,rejected_jobs\n";
  for (const SweepCell& c : cells) {
    csv += c.sweep + ',' + c.setting + ',' + to_string(c.policy) + ',' + std::to_string(c.n_jobs) +
           ',' + fmt(c.total_cost_usd) + ',' + fmt(c.optimal_bound_usd) + ',' +
           fmt(c.total_cost_usd / c.optimal_bound_usd) + ',' + fmt(c.slo_attainment) + ',' +
           std::to_string(c.rejected_jobs) + '\n';
  }
  std::filesystem::create_directories(a.out_dir);
  write_text_file((std::filesystem::path(a.out_dir) / "sweep.csv").string(), csv);
  const ordered_json manifest{{"command", "sweep"},
                              {"jobs", a.jobs},
                              {"seed", a.seed},
                              {"policies", a.policies},
                              {"cluster_config", cluster_config_to_json(so.cfg)}};
  write_text_file((std::filesystem::path(a.out_dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
  std::cout << "wrote " << cells.size() << " sweep cells to " << a.out_dir << "\n";
  return 0;
}

struct SyncArgs {
  double model_gb = 14.0;
  int train_gpus = 8;
  int rollout_gpus = 8;
  double cross_gbps = 20.0;
  double intra_gbps = 400.0;
  double overhead_s = 0.0;
  bool tree = false;
};

int run_sync_model(const SyncArgs& a) {
  SyncTopology t;
  t.model_bytes = a.model_gb * 1e9;
  t.train_gpus = a.train_gpus;
  t.rollout_gpus = a.rollout_gpus;
  t.cross_bw_bytes_s = gbps_to_bytes_per_s(a.cross_gbps);
  t.intra_bw_bytes_s = gbps_to_bytes_per_s(a.intra_gbps);
  t.per_stream_overhead_s = a.overhead_s;
  t.tree_dissemination = a.tree;
  const ordered_json out{
      {"model_gb", a.model_gb},
      {"train_gpus", a.train_gpus},
      {"rollout_gpus", a.rollout_gpus},
      {"cross_gbps", a.cross_gbps},
      {"intra_gbps", a.intra_gbps},
      {"flat", ordered_json{{"time_s", flat_sync_time(t)},
                            {"cross_traffic_gb", flat_cross_traffic_bytes(t) / 1e9}}},
      {"hierarchical", ordered_json{{"time_s", hierarchical_sync_time(t)},
                                    {"cross_traffic_gb", hierarchical_cross_traffic_bytes(t) / 1e9},
                                    {"tree_dissemination", a.tree}}},
      {"speedup", sync_speedup(t)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scheduler and trace-replay simulator for co-executed rollout/training jobs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "replay a trace under a placement policy");
  simulate->add_option("--trace", sim.trace_path, "input trace (JSON Lines)")->required();
  simulate->add_option("--policy", sim.policy, "rollmux | random | greedy | solo | optimal");
  simulate->add_option("--seed", sim.seed, "replay seed");
  simulate->add_option("--config", sim.config_path, "cluster config JSON");
  simulate->add_option("--out-dir", sim.out_dir, "artifact directory")->required();
  simulate->add_flag("--stochastic", sim.stochastic, "sample response tails");
  simulate->add_flag("--migration", sim.migration, "consolidate stragglers");
  simulate->add_flag("--log-latency", sim.log_latency, "time each decision (stderr only)");

  SimulateArgs aud;
  CLI::App* audit = app.add_subcommand("audit", "replay and report conservation violations");
  audit->add_option("--trace", aud.trace_path, "input trace (JSON Lines)")->required();
  audit->add_option("--policy", aud.policy, "rollmux | random | greedy | solo | optimal");
  audit->add_option("--seed", aud.seed, "replay seed");
  audit->add_option("--config", aud.config_path, "cluster config JSON");
  audit->add_flag("--stochastic", aud.stochastic, "sample response tails");
  audit->add_flag("--migration", aud.migration, "consolidate stragglers");

  GenTraceArgs gen;
  CLI::App* gen_trace = app.add_subcommand("gen-trace", "write a synthetic workload trace");
  gen_trace->add_option("--out", gen.out_path, "output trace path")->required();
  gen_trace->add_option("--jobs", gen.jobs, "number of jobs");
  gen_trace->add_option("--mix", gen.mix, "bl | rh | th | mixed");
  gen_trace->add_option("--slo", gen.slo, "'unif' for Unif(1,2), or a fixed bound >= 1");
  gen_trace->add_option("--seed", gen.seed, "generator seed");
  gen_trace->add_option("--arrival-rate", gen.arrival_rate_per_h, "Poisson arrivals per hour");
  gen_trace->add_option("--duration-mean-h", gen.duration_mean_h, "mean job lifetime, hours");
  gen_trace->add_option("--duration-sigma", gen.duration_sigma, "lognormal lifetime spread");
  gen_trace->add_option("--arrivals-from", gen.arrivals_from,
                        "reuse arrival times from an existing trace");

  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the sensitivity sweeps");
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "artifact directory")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "jobs per trace");
  sweep_cmd->add_option("--seed", sweep.seed, "trace seed");
  sweep_cmd->add_option("--policies", sweep.policies, "comma-separated policy list");
  sweep_cmd->add_option("--config", sweep.config_path, "cluster config JSON");
  sweep_cmd->add_option("--threads", sweep.threads, "parallel replays")
      ->envname("ROLLMUX_SIM_THREADS");

  SyncArgs sync;
  CLI::App* sync_cmd = app.add_subcommand("sync-model", "price a parameter synchronization");
  sync_cmd->add_option("--model-gb", sync.model_gb, "parameter payload, GB");
  sync_cmd->add_option("--train-gpus", sync.train_gpus, "shard holders");
  sync_cmd->add_option("--rollout-gpus", sync.rollout_gpus, "replicas to refresh");
  sync_cmd->add_option("--cross-gbps", sync.cross_gbps, "cross-cluster link, Gb/s");
  sync_cmd->add_option("--intra-gbps", sync.intra_gbps, "in-cluster fabric, Gb/s");
  sync_cmd->add_option("--overhead-s", sync.overhead_s, "per-stream setup time");
  sync_cmd->add_flag("--tree", sync.tree, "doubling broadcast instead of a ring");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim, false);
    if (*audit) return run_simulate(aud, true);
    if (*gen_trace) return run_gen_trace(gen);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*sync_cmd) return run_sync_model(sync);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
