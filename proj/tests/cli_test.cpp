#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hca_marl/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(HCA_MARL_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
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
    dir_ = fs::temp_directory_path() / ("hca_marl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.json") << R"({"total_steps": 256, "buffer_size": 128, "metrics_interval": 128,
                                             "seeds": [3], "network": {"hidden": [8]}})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, MissingConfigExitsTwoNamingPath) {
  const auto r = run("train --config " + path("nope.json") + " --out " + path("out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(path("nope.json")), std::string::npos) << r.output;
}

TEST_F(Cli, InvalidConfigExitsTwoWithKeyPath) {
  std::ofstream(dir_ / "bad.json") << R"({"ppo": {"clip_epsilon": 3}})";
  const auto r = run("train --config " + path("bad.json") + " --out " + path("out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("ppo.clip_epsilon"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("fly").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("train --config " + path("small.json") + " --seeds 1,x").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, TrainWritesHeaderedCsvsAndSnapshot) {
  const auto r = run("train --config " + path("small.json") + " --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string csv = slurp(dir_ / "out" / "tennis_1v1_ppo_seed3.csv");
  EXPECT_EQ(csv.rfind(std::string(hca_marl::kMetricsHeader) + "\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "tennis_1v1_ppo_seed3.hcac"));
  const auto snap = hca_marl::load_config(dir_ / "out" / "resolved_config.json");
  EXPECT_TRUE(snap == hca_marl::load_config(path("small.json")));
}

TEST_F(Cli, SeedOverrideGivesExactlyThoseFiles) {
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("out") + " --seeds 1,2").code, 0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "out")) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 2u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "tennis_1v1_ppo_seed1.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "tennis_1v1_ppo_seed2.csv"));
}

TEST_F(Cli, TrainIsBitwiseRepeatable) {
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("a")).code, 0);
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("b")).code, 0);
  for (const char* f : {"tennis_1v1_ppo_seed3.csv", "tennis_1v1_ppo_seed3.hcac", "resolved_config.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, EvalPrintsKeyValueLinesDeterministically) {
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("out")).code, 0);
  const std::string ck = path("out/tennis_1v1_ppo_seed3.hcac");
  const auto a = run("eval --checkpoint " + ck + " --scenario tennis_1v1 --episodes 3 --seed 4");
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_NE(a.output.find("mean_cumulative_reward="), std::string::npos);
  EXPECT_NE(a.output.find("mean_episode_length="), std::string::npos);
  EXPECT_NE(a.output.find("episodes=3\n"), std::string::npos);
  EXPECT_EQ(run("eval --checkpoint " + ck + " --scenario tennis_1v1 --episodes 3 --seed 4").output, a.output);
}

TEST_F(Cli, EvalErrorsExitTwo) {
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("out")).code, 0);
  const std::string ck = path("out/tennis_1v1_ppo_seed3.hcac");
  EXPECT_EQ(run("eval --checkpoint " + ck + " --scenario soccer_2v2").code, 2);
  EXPECT_EQ(run("eval --checkpoint " + ck + " --scenario tennis_1v1 --episodes 0").code, 2);
  EXPECT_EQ(run("eval --checkpoint " + path("none.hcac") + " --scenario tennis_1v1").code, 2);
  std::ofstream(dir_ / "junk.hcac") << "not a checkpoint";
  EXPECT_EQ(run("eval --checkpoint " + path("junk.hcac") + " --scenario tennis_1v1").code, 2);
}

TEST_F(Cli, CompareWritesSeriesAndSummary) {
  ASSERT_EQ(run("train --config " + path("small.json") + " --out " + path("out") + " --seeds 1,2").code, 0);
  const auto r = run("compare --runs '" + path("out/*.csv") + "' --out " + path("cmp"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("baseline ppo"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(path("cmp.csv")));
  EXPECT_TRUE(fs::exists(path("cmp.json")));
  EXPECT_EQ(run("compare --runs '" + path("out/*.csv") + "' --smooth 0 --out " + path("cmp0")).code, 0);
}

TEST_F(Cli, CompareWithoutMatchesExitsTwo) {
  EXPECT_EQ(run("compare --runs '" + path("nothing/*.csv") + "'").code, 2);
  EXPECT_EQ(run("compare --runs '" + path("*.json") + "' --out " + path("x")).code, 2);
}

TEST_F(Cli, DefaultsPrintsResolvedConfig) {
  const auto r = run("defaults --scenario soccer_2v2 --algorithm hca_ppo");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("\"soccer_manager\""), std::string::npos);
}

TEST(CliParsing, SeedList) {
  EXPECT_EQ(hca_marl::parse_seed_list("1,2,30"), (std::vector<std::uint64_t>{1, 2, 30}));
  EXPECT_THROW(hca_marl::parse_seed_list(""), hca_marl::ConfigError);
  EXPECT_THROW(hca_marl::parse_seed_list("1,,2"), hca_marl::ConfigError);
  EXPECT_THROW(hca_marl::parse_seed_list("-1"), hca_marl::ConfigError);
}
