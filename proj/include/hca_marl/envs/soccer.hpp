#pragma once

// Top-down 2D soccer, 2 vs 2. Team 0 ("blue") defends the goal at x = -L and
// team 1 ("purple") the goal at x = +L. Each team fields one striker and one
// goalie; strikers and goalies train as separate groups.
//
// Workers perceive through 14 rays fanned over 180 degrees around their
// heading, each reporting a one-hot over 7 object types and a normalized hit
// distance (112 values). A team manager casts the same fan from the centre of
// its own goal line with 6 object types (98 values).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hca_marl/envs/env.hpp"
#include "hca_marl/envs/geometry.hpp"
#include "hca_marl/error.hpp"

namespace hca_marl {

struct SoccerConfig {
  double half_length = 16.0;
  double half_width = 10.0;
  double goal_half_width = 3.0;
  double agent_radius = 0.6;
  double ball_radius = 0.4;
  double striker_speed = 0.35;
  double goalie_speed = 0.35;
  double turn_rate = 0.15;  // radians per step
  double kick_speed = 0.8;
  double ball_friction = 0.96;
  double worker_ray_range = 20.0;
  std::size_t max_steps = 1000;
  bool literal_goalie_reward = false;  // goalie -1 when its team scores, +0.1 when it concedes

  friend bool operator==(const SoccerConfig&, const SoccerConfig&) = default;

  void validate() const {
    if (!(half_length > 0 && half_width > 0 && goal_half_width > 0 && goal_half_width < half_width)) {
      throw ConfigError("env", "soccer field dimensions must be positive and the goal narrower than the field");
    }
    if (!(ball_friction > 0 && ball_friction <= 1)) throw ConfigError("env.ball_friction", "must lie in (0, 1]");
    if (!(worker_ray_range > 0)) throw ConfigError("env.worker_ray_range", "must be positive");
    if (max_steps == 0) throw ConfigError("env.max_steps", "must be positive");
  }
};

enum class SoccerRole { striker, goalie };

struct SoccerAgentState {
  Vec2 position;
  double heading = 0.0;

  friend bool operator==(const SoccerAgentState&, const SoccerAgentState&) = default;
};

struct SoccerState {
  Vec2 ball_position;
  Vec2 ball_velocity;
  std::vector<SoccerAgentState> agents;  // roster order
  std::size_t steps = 0;
  bool finished = false;

  friend bool operator==(const SoccerState&, const SoccerState&) = default;
};

inline constexpr std::size_t kRayCount = 14;
inline constexpr std::size_t kWorkerRayTypes = 7;   // ball, own goal, opponent goal, wall, teammate, opponent striker, opponent goalie
inline constexpr std::size_t kManagerRayTypes = 6;  // ball, own goal, opponent goal, wall, own agent, opponent agent
inline constexpr std::size_t kWorkerRayDim = kRayCount * (kWorkerRayTypes + 1);
inline constexpr std::size_t kManagerRayDim = kRayCount * (kManagerRayTypes + 1);

inline constexpr double kGoalReward = 1.0;
inline constexpr double kOwnGoalStrikerPenalty = -0.1;
inline constexpr double kConcedeGoaliePenalty = -1.0;
inline constexpr double kScoreGoalieBonus = 0.1;
inline constexpr double kStrikerExistential = -0.001;
inline constexpr double kGoalieExistential = 0.001;

/// Striker actions: forward, backward, strafe left, strafe right, turn left, turn right.
/// Goalie actions: forward, backward, strafe left, strafe right.
class SoccerEnv : public MultiAgentEnv {
 public:
  explicit SoccerEnv(SoccerConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    roster_ = {
        {"blue_striker", 0, "striker", "striker", kWorkerRayDim, {ActionKind::discrete, 6}},
        {"blue_goalie", 0, "goalie", "goalie", kWorkerRayDim, {ActionKind::discrete, 4}},
        {"purple_striker", 1, "striker", "striker", kWorkerRayDim, {ActionKind::discrete, 6}},
        {"purple_goalie", 1, "goalie", "goalie", kWorkerRayDim, {ActionKind::discrete, 4}},
    };
    reset(0);
  }

  const std::vector<AgentSpec>& roster() const override { return roster_; }
  const SoccerConfig& config() const { return cfg_; }
  const SoccerState& state() const { return state_; }
  std::size_t step_count() const override { return state_.steps; }

  void set_state(const SoccerState& s) {
    if (s.agents.size() != roster_.size()) throw ShapeError("soccer state has wrong agent count");
    state_ = s;
  }

  std::vector<Vector> reset(std::uint64_t seed) override {
    rng_.seed(seed);
    state_ = SoccerState{};
    const double l = cfg_.half_length;
    for (const auto& a : roster_) {
      const double s = a.team == 0 ? 1.0 : -1.0;
      SoccerAgentState st;
      if (a.role == "striker") {
        st.position = {s * (-0.5 * l + uniform(-2.0, 2.0)), uniform(-3.0, 3.0)};
      } else {
        st.position = {s * (-l + 1.5), uniform(-2.0, 2.0)};
      }
      st.heading = a.team == 0 ? 0.0 : std::numbers::pi;
      state_.agents.push_back(st);
    }
    state_.ball_position = {uniform(-1.0, 1.0), uniform(-2.0, 2.0)};
    return observations();
  }

  using MultiAgentEnv::step;

  StepResult step(std::span<const Action> actions) override {
    check_actions(actions);
    if (state_.finished) throw ActionError("soccer match already finished; call reset()");
    StepResult out;
    out.rewards.assign(roster_.size(), 0.0);
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      out.rewards[i] += roster_[i].role == "striker" ? kStrikerExistential : kGoalieExistential;
      move_agent(i, static_cast<int>(actions[i][0]));
    }
    kick_ball();
    const int scorer = move_ball();
    if (scorer >= 0) {
      apply_goal(out, scorer);
      state_.finished = true;
    }
    ++state_.steps;
    out.done = state_.finished;
    out.truncated = !out.done && state_.steps >= cfg_.max_steps;
    out.observations = observations();
    return out;
  }

  Vector worker_observation(std::size_t agent) const override {
    const auto& me = state_.agents.at(agent);
    const int team = roster_[agent].team;
    std::vector<double> v;
    v.reserve(kWorkerRayDim);
    cast_fan(me.position, me.heading, cfg_.worker_ray_range, agent, team, false, v);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  std::vector<std::string> manager_quantities() const override {
    return {"ray_scan", "worker_obs", "own_worker_obs"};
  }

  void append_quantity(std::string_view name, int team, std::vector<double>& out) const override {
    if (name == "ray_scan") {
      const double l = cfg_.half_length;
      const Vec2 origin{team == 0 ? -l + 1e-6 : l - 1e-6, 0.0};
      const double heading = team == 0 ? 0.0 : std::numbers::pi;
      const double range = std::hypot(2.0 * l, cfg_.half_width);
      cast_fan(origin, heading, range, roster_.size(), team, true, out);
    } else if (name == "worker_obs" || name == "own_worker_obs") {
      for (int t : {team, 1 - team}) {
        if (name == "own_worker_obs" && t != team) continue;
        for (std::size_t i = 0; i < roster_.size(); ++i) {
          if (roster_[i].team != t) continue;
          const Vector o = worker_observation(i);
          out.insert(out.end(), o.data(), o.data() + o.size());
        }
      }
    } else {
      throw ConfigError("manager_obs_recipe", "soccer does not provide quantity '" + std::string(name) + "'");
    }
  }

  /// Ray angles relative to the heading, evenly spaced over [-90, +90] degrees.
  static std::array<double, kRayCount> ray_offsets() {
    std::array<double, kRayCount> a{};
    for (std::size_t i = 0; i < kRayCount; ++i) {
      a[i] = -std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(i) / (kRayCount - 1);
    }
    return a;
  }

 private:
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  void move_agent(std::size_t i, int action) {
    auto& a = state_.agents[i];
    const bool striker = roster_[i].role == "striker";
    const double speed = striker ? cfg_.striker_speed : cfg_.goalie_speed;
    const Vec2 fwd = unit_from_angle(a.heading);
    const Vec2 left{-fwd.y, fwd.x};
    Vec2 delta;
    switch (action) {
      case 0: delta = speed * fwd; break;
      case 1: delta = -speed * fwd; break;
      case 2: delta = speed * left; break;
      case 3: delta = -speed * left; break;
      case 4: a.heading += cfg_.turn_rate; break;
      case 5: a.heading -= cfg_.turn_rate; break;
      default: break;
    }
    a.heading = std::remainder(a.heading, 2.0 * std::numbers::pi);
    const double r = cfg_.agent_radius;
    a.position.x = std::clamp(a.position.x + delta.x, -cfg_.half_length + r, cfg_.half_length - r);
    a.position.y = std::clamp(a.position.y + delta.y, -cfg_.half_width + r, cfg_.half_width - r);
  }

  void kick_ball() {
    const double contact = cfg_.agent_radius + cfg_.ball_radius;
    for (const auto& a : state_.agents) {
      const Vec2 d = state_.ball_position - a.position;
      const double dist = norm(d);
      if (dist >= contact) continue;
      const Vec2 dir = dist > 1e-12 ? (1.0 / dist) * d : unit_from_angle(a.heading);
      state_.ball_velocity = cfg_.kick_speed * dir;
      state_.ball_position = a.position + contact * dir;
    }
  }

  /// Advances the ball; returns the scoring team or -1.
  int move_ball() {
    Vec2& p = state_.ball_position;
    Vec2& v = state_.ball_velocity;
    p += v;
    v = cfg_.ball_friction * v;
    const double l = cfg_.half_length;
    const double w = cfg_.half_width;
    const double br = cfg_.ball_radius;
    if (std::abs(p.y) < cfg_.goal_half_width) {
      if (p.x >= l) {
        p.x = l;
        return 0;
      }
      if (p.x <= -l) {
        p.x = -l;
        return 1;
      }
    } else if (std::abs(p.x) > l - br) {
      p.x = std::clamp(p.x, -(l - br), l - br);
      v.x = -v.x;
    }
    if (std::abs(p.y) > w - br) {
      p.y = std::clamp(p.y, -(w - br), w - br);
      v.y = -v.y;
    }
    return -1;
  }

  void apply_goal(StepResult& out, int scorer) {
    out.events.push_back(std::string("goal:") + (scorer == 0 ? "blue" : "purple"));
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      const bool scored = roster_[i].team == scorer;
      if (roster_[i].role == "striker") {
        out.rewards[i] += scored ? kGoalReward : kOwnGoalStrikerPenalty;
      } else if (cfg_.literal_goalie_reward) {
        out.rewards[i] += scored ? kConcedeGoaliePenalty : kScoreGoalieBonus;
      } else {
        out.rewards[i] += scored ? kScoreGoalieBonus : kConcedeGoaliePenalty;
      }
    }
  }

  /// Casts the 14-ray fan. `self` is excluded from hits (pass roster size for none).
  void cast_fan(Vec2 origin, double heading, double range, std::size_t self, int team, bool manager,
                std::vector<double>& out) const {
    const std::size_t types = manager ? kManagerRayTypes : kWorkerRayTypes;
    const double l = cfg_.half_length;
    const double w = cfg_.half_width;
    const double g = cfg_.goal_half_width;
    const double own_goal_x = team == 0 ? -l : l;
    const double opp_goal_x = -own_goal_x;
    for (double offset : ray_offsets()) {
      const Vec2 dir = unit_from_angle(heading + offset);
      double best = range;
      int hit = -1;
      auto consider = [&](double t, int type) {
        if (t < best) {
          best = t;
          hit = type;
        }
      };
      consider(ray_circle(origin, dir, state_.ball_position, cfg_.ball_radius), 0);
      consider(ray_segment(origin, dir, {own_goal_x, -g}, {own_goal_x, g}), 1);
      consider(ray_segment(origin, dir, {opp_goal_x, -g}, {opp_goal_x, g}), 2);
      consider(ray_segment(origin, dir, {-l, w}, {l, w}), 3);
      consider(ray_segment(origin, dir, {-l, -w}, {l, -w}), 3);
      for (double x : {-l, l}) {
        consider(ray_segment(origin, dir, {x, g}, {x, w}), 3);
        consider(ray_segment(origin, dir, {x, -w}, {x, -g}), 3);
      }
      for (std::size_t j = 0; j < roster_.size(); ++j) {
        if (j == self) continue;
        int type;
        if (manager) {
          type = roster_[j].team == team ? 4 : 5;
        } else if (roster_[j].team == team) {
          type = 4;
        } else {
          type = roster_[j].role == "striker" ? 5 : 6;
        }
        consider(ray_circle(origin, dir, state_.agents[j].position, cfg_.agent_radius), type);
      }
      for (std::size_t k = 0; k < types; ++k) out.push_back(static_cast<int>(k) == hit ? 1.0 : 0.0);
      out.push_back(hit < 0 ? 1.0 : best / range);
    }
  }

  SoccerConfig cfg_;
  std::vector<AgentSpec> roster_;
  SoccerState state_;
  std::mt19937_64 rng_;
};

}  // namespace hca_marl
