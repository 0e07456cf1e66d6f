#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hca_marl/harness.hpp"

using namespace hca_marl;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hca_marl_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small(const std::string& extra = "") {
  const std::string doc = R"({"total_steps": 640, "buffer_size": 256, "metrics_interval": 128, "seeds": [7],
                              "network": {"hidden": [16, 16]})" +
                          (extra.empty() ? "" : ", " + extra) + "}";
  return parse_config_text(doc);
}

void expect_same_records(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(metrics_csv_row(a[i]), metrics_csv_row(b[i]));
}

}  // namespace

TEST(Harness, ZeroStepsWritesHeaderOnly) {
  auto cfg = small();
  cfg.total_steps = 0;
  const auto dir = scratch("zero");
  const auto outcomes = run_experiment(cfg, dir);
  ASSERT_EQ(outcomes.size(), 1u);
  EXPECT_FALSE(outcomes[0].failed);
  EXPECT_EQ(slurp(dir / "tennis_1v1_ppo_seed7.csv"), std::string(kMetricsHeader) + "\n");
  std::filesystem::remove_all(dir);
}

TEST(Harness, RecordsPerGroupAndInterval) {
  Trainer t(small(), 7);
  const auto& recs = t.run();
  EXPECT_EQ(t.env_steps(), 640u);
  EXPECT_EQ(t.update_count(), 5u);
  ASSERT_EQ(recs.size(), 5u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].agent_group, "racket");
    EXPECT_EQ(recs[i].step, 128 * (i + 1));
    EXPECT_TRUE(std::isfinite(recs[i].entropy));
    EXPECT_TRUE(std::isfinite(recs[i].value_estimate_mean));
  }
  // Untrained Gaussian head, log_std 0 over 3 dimensions.
  EXPECT_NEAR(recs[0].entropy, 3 * 1.4189385332046727, 1e-12);
}

TEST(Harness, SoccerTrainsStrikerAndGoalieSeparately) {
  auto cfg = parse_config_text(R"({"scenario": "soccer_2v2", "total_steps": 100, "buffer_size": 100,
                                   "metrics_interval": 100, "network": {"hidden": [8]}})");
  Trainer t(cfg, 1);
  const auto& recs = t.run();
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].agent_group, "striker");
  EXPECT_EQ(recs[1].agent_group, "goalie");
  EXPECT_NEAR(recs[0].entropy, std::log(6.0), 1e-3);
  EXPECT_NEAR(recs[1].entropy, std::log(4.0), 1e-3);
  EXPECT_TRUE(std::isnan(recs[0].cumulative_reward_mean));  // no episode finished yet
}

TEST(Harness, SeededRunsAreBitwiseReproducible) {
  const auto cfg = small(R"("algorithm": "hca_ppo")");
  Trainer a(cfg, 3), b(cfg, 3), c(cfg, 4);
  expect_same_records(a.run(), b.run());
  EXPECT_EQ(encode_checkpoint(a.checkpoint()), encode_checkpoint(b.checkpoint()));
  c.run();
  EXPECT_NE(encode_checkpoint(a.checkpoint()), encode_checkpoint(c.checkpoint()));

  const auto d1 = scratch("det1"), d2 = scratch("det2");
  run_experiment(cfg, d1);
  run_experiment(cfg, d2, 2);
  for (const char* f : {"tennis_1v1_hca_ppo_seed7.csv", "tennis_1v1_hca_ppo_seed7.hcac"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Harness, TiedIdentityManagersReduceToPpo) {
  const auto ppo_cfg = small();
  auto hca_cfg = ppo_cfg;
  hca_cfg.algorithm = Algorithm::hca_ppo;
  hca_cfg.hierarchy = default_hierarchy(Scenario::tennis_1v1, {"identity"}, false, true);
  hca_cfg.validate();
  ASSERT_EQ(hca_cfg.hierarchy.managers.size(), 2u);

  Trainer ppo(ppo_cfg, 11), hca(hca_cfg, 11);
  expect_same_records(ppo.run(), hca.run());
  EXPECT_EQ(hca.update_count(), 5u);
  EXPECT_EQ(encode_checkpoint(ppo.checkpoint()), encode_checkpoint(hca.checkpoint()));
}

TEST(Harness, FusedValueDominatesLocalValue) {
  for (const char* recipe : {"M1", "M4"}) {
    auto cfg = small(std::string(R"("algorithm": "hca_ppo", "hierarchy": {"manager_obs_recipe": [")") + recipe +
                     R"("]})");
    cfg.network.critic_output_scale = 1.0;  // distinct critics from the first step
    Trainer t(cfg, 5);
    bool strict = false;
    for (const auto& r : t.run()) {
      EXPECT_GE(r.value_estimate_mean, r.local_value_estimate_mean);
      strict = strict || r.value_estimate_mean > r.local_value_estimate_mean;
    }
    EXPECT_TRUE(strict);
  }
}

TEST(Harness, PpoRecordsFusedEqualsLocal) {
  Trainer t(small(), 5);
  for (const auto& r : t.run()) EXPECT_EQ(r.value_estimate_mean, r.local_value_estimate_mean);
}

TEST(Harness, NonFiniteLossMarksSeedFailedAndOthersContinue) {
  auto cfg = small();
  cfg.seeds = {1, 2};
  cfg.network.critic_output_scale = 1e308;
  const auto dir = scratch("failed");
  const auto outcomes = run_experiment(cfg, dir);
  ASSERT_EQ(outcomes.size(), 2u);
  for (const auto& o : outcomes) {
    EXPECT_TRUE(o.failed);
    const std::string text = slurp(o.metrics_path);
    EXPECT_EQ(text.rfind(kMetricsHeader, 0), 0u);
    EXPECT_NE(text.find("\n# failed: "), std::string::npos) << text;
  }
  std::filesystem::remove_all(dir);
}

TEST(Harness, CheckpointNamesRecords) {
  auto cfg = small(R"("algorithm": "hca_ppo")");
  cfg.total_steps = 0;
  Trainer t(cfg, 1);
  std::vector<std::string> names;
  for (const auto& r : t.checkpoint()) names.push_back(r.name);
  EXPECT_EQ(names, (std::vector<std::string>{"racket/actor", "racket/critic", "manager/manager_0", "manager/manager_1"}));
}

TEST(Evaluate, UntrainedCheckpointMatchesDirectRollout) {
  Trainer t(small(), 2);
  const auto records = t.checkpoint();
  const EvalSummary s = evaluate(records, Scenario::tennis_1v1, 4, 99);
  EXPECT_EQ(s.episodes, 4u);

  // Same rollout written out by hand: mean actions, env seeds drawn from one generator.
  const PolicyHead& head = t.actor("racket");
  TennisEnv env;
  std::mt19937_64 rng(99);
  double reward = 0.0, length = 0.0;
  for (int ep = 0; ep < 4; ++ep) {
    auto obs = env.reset(rng());
    for (;;) {
      const auto& g = std::get<GaussianPolicyHead>(head);
      std::vector<Action> acts;
      for (const auto& o : obs) {
        const Vector mu = g.mean_net.forward(o);
        acts.push_back({mu[0], mu[1], mu[2]});
      }
      const auto r = env.step(acts);
      reward += (r.rewards[0] + r.rewards[1]) / 2.0;
      length += 1.0;
      if (r.done || r.truncated) break;
      obs = r.observations;
    }
  }
  EXPECT_DOUBLE_EQ(s.mean_cumulative_reward, reward / 4.0);
  EXPECT_DOUBLE_EQ(s.mean_episode_length, length / 4.0);
}

TEST(Evaluate, DeterministicAndValidated) {
  Trainer t(small(), 2);
  t.run();
  const auto records = t.checkpoint();
  const auto a = evaluate(records, Scenario::tennis_1v1, 3, 5);
  const auto b = evaluate(records, Scenario::tennis_1v1, 3, 5);
  EXPECT_EQ(a.mean_cumulative_reward, b.mean_cumulative_reward);
  EXPECT_EQ(a.mean_episode_length, b.mean_episode_length);
  EXPECT_THROW(evaluate(records, Scenario::tennis_1v1, 0, 5), ConfigError);
  EXPECT_THROW(evaluate(records, Scenario::soccer_2v2, 1, 5), ShapeError);
  EnvOptions ext;
  ext.tennis.extended_observation = true;
  EXPECT_THROW(evaluate(records, Scenario::tennis_2v2, 1, 5, ext), ShapeError);
  EXPECT_NO_THROW(evaluate(records, Scenario::tennis_2v2, 1, 5));
}

TEST(Harness, MetricsRowFormatting) {
  MetricsRecord r;
  r.step = 10;
  r.agent_group = "racket";
  r.entropy = 0.1;
  r.value_estimate_mean = -2.5;
  EXPECT_EQ(metrics_csv_row(r), "10,racket,nan,nan,0.10000000000000001,-2.5");
  EXPECT_EQ(run_file_stem(Scenario::soccer_2v2, Algorithm::hca_ppo, 3), "soccer_2v2_hca_ppo_seed3");
}
