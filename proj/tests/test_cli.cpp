// End-to-end runs of the command-line binary.  ctest exports ROLLMUX_CLI_BIN;
// set it by hand when invoking the test binary directly.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

struct RunResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(std::getenv("ROLLMUX_CLI_BIN")) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {};
  RunResult r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (std::getenv("ROLLMUX_CLI_BIN") == nullptr)
      GTEST_SKIP() << "ROLLMUX_CLI_BIN not set; run under ctest or export it";
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = ::testing::TempDir() + "cli_" + info->name();
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return dir_ + "/" + name; }

  std::string make_trace(int jobs, int seed) {
    const std::string trace = path("trace_" + std::to_string(jobs) + ".jsonl");
    const RunResult r = run_cli("gen-trace --jobs " + std::to_string(jobs) + " --seed " +
                                std::to_string(seed) + " --out " + trace);
    EXPECT_EQ(r.status, 0) << r.output;
    return trace;
  }

  std::string dir_;
};

TEST_F(CliTest, GenTraceThenSimulateWritesTheBundle) {
  const std::string trace = make_trace(8, 3);
  const RunResult sim =
      run_cli("simulate --trace " + trace + " --policy rollmux --seed 1 --out-dir " + path("out"));
  ASSERT_EQ(sim.status, 0) << sim.output;
  EXPECT_NE(sim.output.find("attainment 1"), std::string::npos) << sim.output;

  const auto summary = nlohmann::json::parse(slurp(path("out/summary.json")));
  EXPECT_EQ(summary.at("n_jobs"), 8);
  EXPECT_EQ(summary.at("policy"), "rollmux");
  EXPECT_EQ(summary.at("slo_attainment"), 1.0);
  EXPECT_EQ(summary.at("rejected_jobs"), 0);
  EXPECT_TRUE(summary.at("audit_ok").get<bool>());
  EXPECT_EQ(summary.at("jobs").size(), 8u);

  const std::string csv = slurp(path("out/timeseries.csv"));
  EXPECT_EQ(csv.rfind("# rollmux-timeseries-v1\nt_s,rollout_gpus,train_gpus,cost_per_h\n", 0), 0u);

  std::istringstream decisions(slurp(path("out/decisions.jsonl")));
  int lines = 0;
  for (std::string line; std::getline(decisions, line);) {
    EXPECT_TRUE(nlohmann::json::parse(line).contains("job")) << line;
    ++lines;
  }
  EXPECT_EQ(lines, 8);

  const auto manifest = nlohmann::json::parse(slurp(path("out/manifest.json")));
  EXPECT_EQ(manifest.at("command"), "simulate");
  EXPECT_EQ(manifest.at("seed"), 1);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const std::string trace = make_trace(15, 6);
  const std::string args = "simulate --trace " + trace + " --policy random --seed 9 --out-dir ";
  ASSERT_EQ(run_cli(args + path("a")).status, 0);
  ASSERT_EQ(run_cli(args + path("b")).status, 0);
  for (const char* name : {"summary.json", "timeseries.csv", "decisions.jsonl", "manifest.json"}) {
    EXPECT_EQ(slurp(path("a/") + name), slurp(path("b/") + name)) << name;
    EXPECT_FALSE(slurp(path("a/") + name).empty()) << name;
  }
}

TEST_F(CliTest, MalformedTracesNameTheLine) {
  const std::string trace = make_trace(1, 2);
  std::ofstream(trace, std::ios::app) << "{broken\n";
  const RunResult sim =
      run_cli("simulate --trace " + trace + " --policy rollmux --seed 1 --out-dir " + path("out"));
  EXPECT_NE(sim.status, 0);
  EXPECT_NE(sim.output.find("trace line 2"), std::string::npos) << sim.output;
}

TEST_F(CliTest, UnknownPoliciesListTheMenu) {
  const std::string trace = make_trace(2, 2);
  const RunResult sim =
      run_cli("simulate --trace " + trace + " --policy fifo --seed 1 --out-dir " + path("out"));
  EXPECT_NE(sim.status, 0);
  EXPECT_NE(sim.output.find("valid: rollmux, random, greedy, solo, optimal"), std::string::npos)
      << sim.output;
}

TEST_F(CliTest, ClairvoyantGuardrailExplainsItself) {
  const std::string big = make_trace(20, 4);
  const RunResult refused =
      run_cli("simulate --trace " + big + " --policy optimal --seed 1 --out-dir " + path("out"));
  EXPECT_NE(refused.status, 0);
  EXPECT_NE(refused.output.find("intractable"), std::string::npos) << refused.output;

  const std::string small = make_trace(12, 4);
  const RunResult ok = run_cli("simulate --trace " + small +
                               " --policy optimal --seed 1 --out-dir " + path("out2"));
  EXPECT_EQ(ok.status, 0) << ok.output;
  const auto summary = nlohmann::json::parse(slurp(path("out2/summary.json")));
  EXPECT_EQ(summary.at("slo_attainment"), 1.0);
}

TEST_F(CliTest, SweepWritesTheMatrix) {
  const RunResult r = run_cli("sweep --jobs 6 --seed 2 --policies rollmux --threads 2 --out-dir " +
                              path("out"));
  ASSERT_EQ(r.status, 0) << r.output;
  std::istringstream csv(slurp(path("out/sweep.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "# rollmux-sweep-v1");
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("sweep,setting,policy,", 0), 0u);
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_NE(line.find(",rollmux,"), std::string::npos) << line;
    EXPECT_NE(line.find(",1.0,0"), std::string::npos) << line;  // attainment 1.0, 0 rejections
    ++rows;
  }
  EXPECT_EQ(rows, 12);  // 4 mixes + 4 slo modes + 4 residencies
}

TEST_F(CliTest, SyncModelSpeaksJson) {
  const RunResult r = run_cli("sync-model --model-gb 14");
  ASSERT_EQ(r.status, 0) << r.output;
  const auto out = nlohmann::json::parse(r.output);
  EXPECT_EQ(out.at("flat").at("cross_traffic_gb"), 112.0);
  EXPECT_EQ(out.at("hierarchical").at("cross_traffic_gb"), 14.0);
  EXPECT_GE(out.at("speedup").get<double>(), 7.5);
  EXPECT_LE(out.at("speedup").get<double>(), 8.5);
}

TEST_F(CliTest, AuditReportsCleanRuns) {
  const std::string trace = make_trace(10, 5);
  const RunResult r = run_cli("audit --trace " + trace + " --policy random --seed 4");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("audit clean"), std::string::npos) << r.output;
}

}  // namespace
