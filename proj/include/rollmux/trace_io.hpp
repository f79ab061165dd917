#pragma once
// Trace and config serialization.  Traces are JSON Lines, one job per line;
// cluster configs are a single JSON document.  Errors name the offending line
// so a 300-job trace with one bad record is debuggable.

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rollmux/domain.hpp"

namespace rollmux {

using ordered_json = nlohmann::ordered_json;

inline ordered_json job_to_json(const JobSpec& j) {
  if (j.tail.family == TailFamily::kEmpirical)
    throw std::invalid_argument("job_to_json: empirical tail of job '" + j.id +
                                "' cannot be serialized; only lognormal tails round-trip");
  ordered_json o;
  o["id"] = j.id;
  o["arrival_s"] = j.arrival_s;
  o["duration_s"] = j.duration_s;
  o["roll_s"] = j.rollout.worst_case_s;
  o["train_s"] = j.train.worst_case_s;
  o["roll_gpus"] = j.rollout.gpus;
  o["train_gpus"] = j.train.gpus;
  o["roll_mem_gb"] = j.rollout.mem_gb;
  o["train_mem_gb"] = j.train.mem_gb;
  if (std::isfinite(j.slo))
    o["slo"] = j.slo;
  else
    o["slo"] = nullptr;  // unbounded
  o["max_tokens"] = j.max_tokens;
  o["tail"] = {{"family", "lognormal"}, {"mu", j.tail.mu}, {"sigma", j.tail.sigma}};
  return o;
}

inline JobSpec job_from_json(const ordered_json& o) {
  JobSpec j;
  j.id = o.at("id").get<std::string>();
  j.arrival_s = o.at("arrival_s").get<double>();
  j.duration_s = o.at("duration_s").get<double>();
  j.rollout.worst_case_s = o.at("roll_s").get<double>();
  j.train.worst_case_s = o.at("train_s").get<double>();
  j.rollout.gpus = o.at("roll_gpus").get<int>();
  j.train.gpus = o.at("train_gpus").get<int>();
  j.rollout.mem_gb = o.at("roll_mem_gb").get<double>();
  j.train.mem_gb = o.at("train_mem_gb").get<double>();
  const auto& slo = o.at("slo");
  j.slo = slo.is_null() ? std::numeric_limits<double>::infinity() : slo.get<double>();
  j.max_tokens = o.at("max_tokens").get<double>();
  const auto& tail = o.at("tail");
  const auto family = tail.at("family").get<std::string>();
  if (family != "lognormal")
    throw std::invalid_argument("unknown tail family '" + family + "'; expected 'lognormal'");
  j.tail.family = TailFamily::kLognormalTruncated;
  j.tail.mu = tail.at("mu").get<double>();
  j.tail.sigma = tail.at("sigma").get<double>();
  j.tail.cap = j.max_tokens;
  j.validate();
  return j;
}

inline std::string trace_to_jsonl(const std::vector<JobSpec>& jobs) {
  std::string out;
  for (const JobSpec& j : jobs) {
    out += job_to_json(j).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<JobSpec> parse_trace(std::istream& in) {
  std::vector<JobSpec> jobs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      jobs.push_back(job_from_json(ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return jobs;
}

inline void write_trace(const std::string& path, const std::vector<JobSpec>& jobs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << trace_to_jsonl(jobs);
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline std::vector<JobSpec> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return parse_trace(in);
}

// ---------------------------------------------------------------------------
// Cluster config.

inline ordered_json cluster_config_to_json(const ClusterConfig& cfg) {
  ordered_json kinds = ordered_json::array();
  for (const GpuKind& k : cfg.gpu_kinds)
    kinds.push_back({{"name", k.name},
                     {"hourly_cost_usd", k.hourly_cost_usd},
                     {"role", to_string(k.role)}});
  return ordered_json{{"gpu_kinds", kinds},
                      {"gpus_per_node", cfg.gpus_per_node},
                      {"host_mem_gb", cfg.host_mem_gb},
                      {"max_group_residency", cfg.max_group_residency},
                      {"packing_candidate_cap", cfg.packing_candidate_cap},
                      {"migration_threshold", cfg.migration_threshold},
                      {"migration_pause_s", cfg.migration_pause_s},
                      {"sync_handoff_s", cfg.sync_handoff_s},
                      {"optimal_max_jobs", cfg.optimal_max_jobs},
                      {"optimal_window", cfg.optimal_window}};
}

inline ClusterConfig cluster_config_from_json(const ordered_json& o) {
  ClusterConfig cfg;
  if (o.contains("gpu_kinds")) {
    cfg.gpu_kinds.clear();
    for (const auto& k : o.at("gpu_kinds")) {
      GpuKind kind;
      kind.name = k.at("name").get<std::string>();
      kind.hourly_cost_usd = k.at("hourly_cost_usd").get<double>();
      const auto role = k.at("role").get<std::string>();
      if (role == to_string(PoolRole::kRollout))
        kind.role = PoolRole::kRollout;
      else if (role == to_string(PoolRole::kTraining))
        kind.role = PoolRole::kTraining;
      else
        throw std::invalid_argument("unknown pool role '" + role + "'");
      cfg.gpu_kinds.push_back(kind);
    }
  }
  if (o.contains("gpus_per_node")) cfg.gpus_per_node = o.at("gpus_per_node").get<int>();
  if (o.contains("host_mem_gb")) cfg.host_mem_gb = o.at("host_mem_gb").get<double>();
  if (o.contains("max_group_residency"))
    cfg.max_group_residency = o.at("max_group_residency").get<int>();
  if (o.contains("packing_candidate_cap"))
    cfg.packing_candidate_cap = o.at("packing_candidate_cap").get<int>();
  if (o.contains("migration_threshold"))
    cfg.migration_threshold = o.at("migration_threshold").get<double>();
  if (o.contains("migration_pause_s"))
    cfg.migration_pause_s = o.at("migration_pause_s").get<double>();
  if (o.contains("sync_handoff_s")) cfg.sync_handoff_s = o.at("sync_handoff_s").get<double>();
  if (o.contains("optimal_max_jobs")) cfg.optimal_max_jobs = o.at("optimal_max_jobs").get<int>();
  if (o.contains("optimal_window")) cfg.optimal_window = o.at("optimal_window").get<int>();
  cfg.validate();
  return cfg;
}

inline ClusterConfig read_cluster_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return cluster_config_from_json(ordered_json::parse(in));
  } catch (const std::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << body;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace rollmux
