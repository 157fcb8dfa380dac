#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Output {
  int code = -1;
  std::string text;
};

Output atena(const std::string& args) {
  const std::string cmd = std::string(ATENA_CLI_PATH) + " " + args + " 2>&1";
  Output out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) out.text += buf.data();
  const int status = pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("atena_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Json config{{"n_nodes", 20},         {"feature_dim", 8},  {"n_seen_worlds", 2},
                      {"n_test_worlds", 2},    {"tasks_per_seen_world", 10},
                      {"episodes_per_world", 10}, {"hidden_dim", 8}, {"bc_epochs", 30},
                      {"seeds", {0, 1}},       {"out_dir", (dir / "runs").string()}};
    std::ofstream(dir / "config.json") << config.dump(2);
  }
  std::string config_arg() const { return "--config " + (dir / "config.json").string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, RequiresSubcommand) {
  EXPECT_NE(atena("").code, 0);
  const auto help = atena("--help");
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"pretrain", "run", "sweep", "serve", "report"})
    EXPECT_NE(help.text.find(sub), std::string::npos) << sub;
}

TEST_F(Cli, RunWritesLogsPerSeed) {
  const auto out = atena("run " + config_arg() + " --set method=meo_al");
  ASSERT_EQ(out.code, 0) << out.text;
  for (int seed : {0, 1}) {
    const auto run = dir / "runs" / ("meo_al_uncertainty_seed" + std::to_string(seed));
    for (const char* f : {"episodes.jsonl", "report.json", "config.json", "timing.json"})
      EXPECT_TRUE(fs::exists(run / f)) << run / f;
    EXPECT_EQ(Json::parse(slurp(run / "report.json"))["method"], "meo_al");
  }
  EXPECT_NE(out.text.find("SR"), std::string::npos);
}

TEST_F(Cli, RunIsDeterministicAcrossProcesses) {
  const auto run = dir / "runs" / "atena_uncertainty_seed1";
  ASSERT_EQ(atena("run " + config_arg() + " --seed 1").code, 0);
  fs::copy(run, dir / "first");
  ASSERT_EQ(atena("run " + config_arg() + " --seed 1").code, 0);
  for (const char* f : {"episodes.jsonl", "report.json", "config.json"})
    EXPECT_EQ(slurp(dir / "first" / f), slurp(run / f)) << f;
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(atena("run " + config_arg() + " --set lambda=2").code, 2);
  EXPECT_EQ(atena("run " + config_arg() + " --set bogus=1").code, 2);
  EXPECT_EQ(atena("run --config " + (dir / "missing.json").string()).code, 2);
  EXPECT_EQ(atena("sweep " + config_arg() + " --grid lambda").code, 2);
}

TEST_F(Cli, PretrainThenRunFromCheckpoint) {
  const auto pre = atena("pretrain " + config_arg() + " --out " + (dir / "ckpt").string());
  ASSERT_EQ(pre.code, 0) << pre.text;
  EXPECT_TRUE(fs::exists(dir / "ckpt" / "policy_seed0.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "ckpt" / "policy_seed1.ckpt"));
  const auto ckpt = (dir / "ckpt" / "policy_seed{seed}.ckpt").string();
  ASSERT_EQ(atena("run " + config_arg() + " --set policy_checkpoint=" + ckpt + " --out " + (dir / "from_ckpt").string()).code, 0);
  ASSERT_EQ(atena("run " + config_arg() + " --out " + (dir / "fresh").string()).code, 0);
  EXPECT_EQ(slurp(dir / "from_ckpt" / "atena_uncertainty_seed0" / "episodes.jsonl"),
            slurp(dir / "fresh" / "atena_uncertainty_seed0" / "episodes.jsonl"));
}

TEST_F(Cli, SweepWritesCsv) {
  const auto out = atena("sweep " + config_arg() + " --grid lambda=0,0.5,1 --threads 1");
  ASSERT_EQ(out.code, 0) << out.text;
  const auto csv = slurp(dir / "runs" / "sweep.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("lambda,flagged,seeds,sr_mean", 0), 0u);
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line)) ++rows, last = line;
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(last.rfind("1,1,2,", 0), 0u) << last;
}

TEST_F(Cli, ReportSummarizesRuns) {
  ASSERT_EQ(atena("run " + config_arg()).code, 0);
  ASSERT_EQ(atena("run " + config_arg() + " --set method=none").code, 0);
  const auto out = atena("report " + (dir / "runs").string() + " --out " + (dir / "summary").string());
  ASSERT_EQ(out.code, 0) << out.text;
  EXPECT_NE(out.text.find("atena"), std::string::npos);
  EXPECT_NE(out.text.find("none"), std::string::npos);
  const auto summary = Json::parse(slurp(dir / "summary" / "summary.json"));
  EXPECT_EQ(summary["schema_version"], 1);
  EXPECT_EQ(summary["rows"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "summary" / "summary.csv"));
  EXPECT_NE(atena("report " + (dir / "nothing").string()).code, 0);
}

TEST_F(Cli, ServeFinishesWithoutFeedbackMethods) {
  const auto out = atena("serve " + config_arg() + " --port 0 --seed 0 --set method=none");
  ASSERT_EQ(out.code, 0) << out.text;
  EXPECT_NE(out.text.find("serving on http://127.0.0.1:"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "runs" / "serve_seed0" / "episodes.jsonl"));
}

TEST_F(Cli, ServeFallsBackOnTimeout) {
  const auto out = atena("serve " + config_arg() + " --port 0 --set interactive_timeout_s=0.01");
  ASSERT_EQ(out.code, 0) << out.text;
  const auto report = Json::parse(slurp(dir / "runs" / "serve_seed0" / "report.json"));
  EXPECT_EQ(report["human_episodes"], 0);
  EXPECT_GT(report["fallback_episodes"].get<int>(), 0);
}
