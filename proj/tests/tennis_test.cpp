#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "hca_marl/envs/episode_log.hpp"
#include "hca_marl/envs/tennis.hpp"
#include "json.hpp"

using namespace hca_marl;

namespace {

const std::vector<Action> kIdle{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};

std::vector<Action> random_actions(const MultiAgentEnv& env, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Action> out;
  for (std::size_t i = 0; i < env.roster().size(); ++i) out.push_back({u(rng), u(rng), u(rng)});
  return out;
}

bool has_event(const StepResult& r, const std::string& e) {
  return std::find(r.events.begin(), r.events.end(), e) != r.events.end();
}

}  // namespace

TEST(Tennis, ResetDimensionsAndDeterminism) {
  TennisEnv env;
  const auto a = env.reset(11);
  ASSERT_EQ(a.size(), 2u);
  for (const auto& o : a) EXPECT_EQ(o.size(), 8);
  EXPECT_EQ(env.reset(11), a);
  EXPECT_NE(env.reset(12), a);
}

TEST(Tennis, TwoVersusTwoDimensions) {
  TennisConfig cfg;
  cfg.players_per_side = 2;
  TennisEnv base(cfg);
  EXPECT_EQ(base.roster().size(), 4u);
  for (const auto& o : base.reset(1)) EXPECT_EQ(o.size(), 8);
  cfg.extended_observation = true;
  TennisEnv ext(cfg);
  for (const auto& o : ext.reset(1)) {
    EXPECT_GT(o.size(), 8);
    EXPECT_LE(o.size(), 20);
  }
  for (const auto& spec : ext.roster()) EXPECT_EQ(spec.observation_dim, 13u);
}

TEST(Tennis, HitOverNetRewardsHitter) {
  TennisEnv env;
  TennisState s = env.state();
  s.ball_position = {-3.0, 2.0};
  s.ball_velocity = {0.0, 0.0};
  s.rackets[0] = {{-3.0, 1.0}, {0.0, 0.0}, false};
  s.rackets[1] = {{12.0, 1.0}, {0.0, 0.0}, false};
  s.last_hitter = -1;
  s.side_has_hit = false;
  env.set_state(s);

  double left = 0.0, right = 0.0;
  bool crossed = false, hit = false;
  StepResult r;
  do {
    r = env.step(kIdle);
    left += r.rewards[0];
    right += r.rewards[1];
    if (has_event(r, "hit:left_0")) hit = true;
    if (has_event(r, "over_net:left_0")) {
      crossed = true;
      EXPECT_DOUBLE_EQ(r.rewards[0], 0.1);
    }
  } while (!r.done && !r.truncated);
  EXPECT_TRUE(hit);
  EXPECT_TRUE(crossed);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(has_event(r, "ground:right_0"));
  EXPECT_DOUBLE_EQ(left, 0.1);
  EXPECT_DOUBLE_EQ(right, -0.1);
}

TEST(Tennis, BallLandingOnOwnSidePenalisesThatWorker) {
  TennisEnv env;
  TennisState s = env.state();
  s.ball_position = {-5.0, 0.5};
  s.ball_velocity = {0.0, -0.6};
  s.rackets[0] = {{-11.0, 1.0}, {0.0, 0.0}, false};
  s.rackets[1] = {{6.0, 1.0}, {0.0, 0.0}, false};
  env.set_state(s);
  const auto r = env.step(kIdle);
  EXPECT_TRUE(r.done);
  EXPECT_DOUBLE_EQ(r.rewards[0], -0.1);
  EXPECT_DOUBLE_EQ(r.rewards[1], 0.0);
  EXPECT_THROW(env.step(kIdle), ActionError);
}

TEST(Tennis, RallyRewardBookkeeping) {
  for (std::size_t players : {1u, 2u}) {
    TennisConfig cfg;
    cfg.players_per_side = players;
    TennisEnv env(cfg);
    std::mt19937_64 rng(21);
    for (std::uint64_t episode = 0; episode < 40; ++episode) {
      env.reset(episode);
      std::size_t penalties = 0, bonuses = 0, crossings = 0;
      StepResult r;
      do {
        r = env.step(random_actions(env, rng));
        ASSERT_EQ(r.rewards.size(), env.roster().size());
        for (double x : r.rewards) {
          if (x == -0.1) ++penalties;
          if (x == 0.1) ++bonuses;
        }
        for (const auto& e : r.events) crossings += e.rfind("over_net:", 0) == 0;
        const auto& st = env.state();
        EXPECT_LE(std::abs(st.ball_position.x), cfg.half_length);
        EXPECT_GE(st.ball_position.y, 0.0);
        EXPECT_LE(st.ball_position.y, cfg.ceiling);
        for (const auto& rk : st.rackets) EXPECT_LE(std::abs(rk.position.x), cfg.half_length);
        for (std::size_t i = 0; i < r.observations.size(); ++i) {
          EXPECT_EQ(static_cast<std::size_t>(r.observations[i].size()), env.roster()[i].observation_dim);
        }
      } while (!r.done && !r.truncated);
      EXPECT_EQ(penalties, r.done ? 1u : 0u);
      EXPECT_EQ(bonuses, crossings);
    }
  }
}

TEST(Tennis, ActionErrorsNameTheAgent) {
  TennisEnv env;
  try {
    env.step(std::vector<Action>{{0.0, 0.0, 0.0}, {0.0, 0.0}});
    FAIL() << "expected ActionError";
  } catch (const ActionError& e) {
    EXPECT_NE(std::string(e.what()).find("right_0"), std::string::npos);
  }
  try {
    env.step(std::map<std::string, Action>{{"left_0", {0.0, 0.0, 0.0}}});
    FAIL() << "expected ActionError";
  } catch (const ActionError& e) {
    EXPECT_NE(std::string(e.what()).find("right_0"), std::string::npos);
  }
  EXPECT_THROW(env.step(std::vector<Action>{{std::nan(""), 0.0, 0.0}, {0.0, 0.0, 0.0}}), ActionError);
  EXPECT_THROW(env.step(std::vector<Action>{{0.0, 0.0, 0.0}}), ActionError);
}

TEST(Tennis, CoincidentBallAndRacketGiveZeroDistance) {
  TennisEnv env;
  TennisState s = env.state();
  s.ball_position = s.rackets[0].position;
  env.set_state(s);
  std::vector<double> d;
  env.append_quantity("ball_racket_distance", 0, d);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_GT(d[1], 0.0);
}

TEST(Tennis, ObservationIsMirroredPerSide) {
  TennisEnv env;
  TennisState s = env.state();
  s.ball_position = {-3.0, 5.0};
  s.ball_velocity = {0.2, 0.1};
  s.rackets[0] = {{-6.0, 1.0}, {0.0, 0.0}, false};
  s.rackets[1] = {{6.0, 1.0}, {0.0, 0.0}, false};
  env.set_state(s);
  const Vector l = env.worker_observation(0), r = env.worker_observation(1);
  EXPECT_DOUBLE_EQ(l[0], -r[0]);
  EXPECT_DOUBLE_EQ(l[1], r[1]);
  EXPECT_DOUBLE_EQ(l[4], -6.0 / 12.0);
  EXPECT_DOUBLE_EQ(r[4], -6.0 / 12.0);
}

TEST(Tennis, EpisodeLogReplaysBitwise) {
  auto play = [](std::uint64_t seed) {
    TennisEnv env;
    std::ostringstream log;
    EpisodeLogger logger(log);
    std::mt19937_64 rng(seed);
    auto obs = env.reset(seed);
    for (std::size_t t = 0; t < 300; ++t) {
      const auto actions = random_actions(env, rng);
      const auto r = env.step(actions);
      logger.record(t, obs, actions, r);
      obs = r.done || r.truncated ? env.reset(seed + t) : r.observations;
    }
    return log.str();
  };
  const std::string a = play(5);
  EXPECT_EQ(a, play(5));
  EXPECT_NE(a, play(6));
  std::istringstream in(a);
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["step"], 0);
  EXPECT_EQ(j["obs_hash"].size(), 2u);
  EXPECT_EQ(j["action"][0].size(), 3u);
  EXPECT_EQ(j["reward"].size(), 2u);
  EXPECT_TRUE(j["done"].is_boolean());
}

TEST(Tennis, ConfigValidation) {
  TennisConfig cfg;
  cfg.players_per_side = 3;
  EXPECT_THROW(TennisEnv{cfg}, ConfigError);
  cfg = {};
  cfg.extended_observation = true;
  EXPECT_THROW(TennisEnv{cfg}, ConfigError);
  cfg = {};
  cfg.shot_depth_max = 20.0;
  EXPECT_THROW(TennisEnv{cfg}, ConfigError);
}
