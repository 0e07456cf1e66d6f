#pragma once

// Side-view 2D tennis. The net sits at x = 0; team 0 ("left") plays on x < 0
// and team 1 ("right") on x > 0. A racket returns the ball automatically
// when the ball comes within reach on its own side, so agents learn where
// to stand and when to jump.
//
// Rewards: +0.1 to the hitter when its shot crosses the net, -0.1 when the
// ball hits the ground on an agent's side (to the racket nearest the landing
// point) or when the agent's shot leaves the arena. Either ends the rally.
//
// Observations are expressed in each team's own frame (x mirrored for the
// right team so that every agent sees its own side at x < 0). Positions are
// divided by the court half-length and velocities multiplied by kVelocityScale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hca_marl/envs/env.hpp"
#include "hca_marl/envs/geometry.hpp"
#include "hca_marl/error.hpp"

namespace hca_marl {

struct TennisConfig {
  std::size_t players_per_side = 1;
  bool extended_observation = false;  // 2v2 only: append teammate position, velocity and distance
  double half_length = 12.0;
  double ceiling = 14.0;
  double net_height = 1.6;
  double net_clearance = 0.5;  // rackets stay this far from the net
  double gravity = 0.02;
  double racket_speed = 0.3;
  double racket_reach = 1.3;
  double racket_rest_height = 1.0;
  double jump_speed = 0.3;
  double jump_threshold = 0.5;
  double shot_depth_min = 2.0;  // landing distance from the net for returned shots
  double shot_depth_max = 10.0;
  double shot_lift_min = 0.35;
  double shot_lift_max = 0.5;
  double serve_height = 3.5;
  std::size_t max_steps = 1000;

  friend bool operator==(const TennisConfig&, const TennisConfig&) = default;

  void validate() const {
    if (players_per_side != 1 && players_per_side != 2) {
      throw ConfigError("env.players_per_side", "tennis supports 1 or 2 players per side");
    }
    if (extended_observation && players_per_side != 2) {
      throw ConfigError("env.extended_observation", "only available with 2 players per side");
    }
    if (!(half_length > 0 && ceiling > 0 && gravity > 0 && racket_speed > 0 && racket_reach > 0)) {
      throw ConfigError("env", "tennis geometry and physics constants must be positive");
    }
    if (!(shot_depth_min > 0 && shot_depth_min <= shot_depth_max && shot_depth_max < half_length)) {
      throw ConfigError("env.shot_depth_max", "shot depths must satisfy 0 < min <= max < half_length");
    }
    if (max_steps == 0) throw ConfigError("env.max_steps", "must be positive");
  }
};

struct RacketState {
  Vec2 position;
  Vec2 velocity;
  bool airborne = false;

  friend bool operator==(const RacketState&, const RacketState&) = default;
};

struct TennisState {
  Vec2 ball_position;
  Vec2 ball_velocity;
  std::vector<RacketState> rackets;  // roster order
  Vec2 previous_ball_position;
  Vec2 previous_ball_velocity;
  std::vector<Vec2> previous_racket_positions;
  int last_hitter = -1;         // roster index of the last racket to hit, -1 after a serve
  bool side_has_hit = false;    // the team on the ball's side already returned it
  std::size_t steps = 0;
  bool finished = false;

  friend bool operator==(const TennisState&, const TennisState&) = default;
};

inline constexpr double kTennisHitReward = 0.1;
inline constexpr double kTennisMissPenalty = -0.1;
inline constexpr double kVelocityScale = 2.0;

class TennisEnv : public MultiAgentEnv {
 public:
  explicit TennisEnv(TennisConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t obs_dim = cfg_.extended_observation ? 13 : 8;
    for (int team = 0; team < 2; ++team) {
      for (std::size_t k = 0; k < cfg_.players_per_side; ++k) {
        roster_.push_back({std::string(team == 0 ? "left_" : "right_") + std::to_string(k), team, "racket",
                           "racket", obs_dim, {ActionKind::continuous, 3}});
      }
    }
    reset(0);
  }

  const std::vector<AgentSpec>& roster() const override { return roster_; }
  const TennisConfig& config() const { return cfg_; }
  const TennisState& state() const { return state_; }
  std::size_t step_count() const override { return state_.steps; }

  /// Replaces the physical state, e.g. for scripted scenarios.
  void set_state(const TennisState& s) {
    if (s.rackets.size() != roster_.size()) throw ShapeError("tennis state has wrong racket count");
    state_ = s;
    if (state_.previous_racket_positions.size() != roster_.size()) {
      state_.previous_racket_positions.clear();
      for (const auto& r : state_.rackets) state_.previous_racket_positions.push_back(r.position);
    }
  }

  std::vector<Vector> reset(std::uint64_t seed) override {
    rng_.seed(seed);
    state_ = TennisState{};
    const double l = cfg_.half_length;
    for (const auto& agent : roster_) {
      const double s = side_sign(agent.team);
      const std::size_t slot = static_cast<std::size_t>(&agent - roster_.data()) % cfg_.players_per_side;
      double own_x;
      if (cfg_.players_per_side == 1) {
        own_x = uniform(-0.75 * l, -0.25 * l);
      } else {
        own_x = slot == 0 ? uniform(-0.85 * l, -0.5 * l) : uniform(-0.45 * l, -0.15 * l);
      }
      RacketState r;
      r.position = {s * own_x, cfg_.racket_rest_height};
      state_.rackets.push_back(r);
    }
    const int receiver = uniform(0.0, 1.0) < 0.5 ? 0 : 1;
    const double s = side_sign(receiver);
    state_.ball_position = {s * -cfg_.net_clearance, cfg_.serve_height};
    const double land = s * -uniform(cfg_.shot_depth_min, cfg_.shot_depth_max);
    state_.ball_velocity = ballistic(state_.ball_position, land, uniform(0.0, 0.15));
    state_.previous_ball_position = state_.ball_position;
    state_.previous_ball_velocity = state_.ball_velocity;
    for (const auto& r : state_.rackets) state_.previous_racket_positions.push_back(r.position);
    return observations();
  }

  using MultiAgentEnv::step;

  StepResult step(std::span<const Action> actions) override {
    check_actions(actions);
    if (state_.finished) throw ActionError("tennis rally already finished; call reset()");

    StepResult out;
    out.rewards.assign(roster_.size(), 0.0);
    state_.previous_ball_position = state_.ball_position;
    state_.previous_ball_velocity = state_.ball_velocity;
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      state_.previous_racket_positions[i] = state_.rackets[i].position;
    }

    for (std::size_t i = 0; i < roster_.size(); ++i) move_racket(i, actions[i]);

    const Vec2 prev = state_.ball_position;
    state_.ball_position += state_.ball_velocity;
    state_.ball_velocity.y -= cfg_.gravity;
    Vec2& ball = state_.ball_position;

    if ((prev.x < 0.0) != (ball.x < 0.0)) {
      const double frac = prev.x / (prev.x - ball.x);
      const double y_at_net = prev.y + frac * (ball.y - prev.y);
      if (y_at_net <= cfg_.net_height) {
        ball.x = prev.x < 0.0 ? -0.05 : 0.05;
        state_.ball_velocity.x = 0.0;
        out.events.push_back("net");
      } else {
        const int left_team = prev.x < 0.0 ? 0 : 1;
        if (state_.last_hitter >= 0 && roster_[static_cast<std::size_t>(state_.last_hitter)].team == left_team) {
          out.rewards[static_cast<std::size_t>(state_.last_hitter)] += kTennisHitReward;
          out.events.push_back("over_net:" + roster_[static_cast<std::size_t>(state_.last_hitter)].id);
        }
        state_.side_has_hit = false;
      }
    }

    if (ball.y <= 0.0) {
      ball.y = 0.0;
      const std::size_t loser = nearest_racket(ball.x < 0.0 ? 0 : 1, ball);
      end_rally(out, loser, "ground");
    } else if (std::abs(ball.x) > cfg_.half_length || ball.y > cfg_.ceiling) {
      ball.x = std::clamp(ball.x, -cfg_.half_length, cfg_.half_length);
      ball.y = std::min(ball.y, cfg_.ceiling);
      const std::size_t loser = state_.last_hitter >= 0 ? static_cast<std::size_t>(state_.last_hitter)
                                                        : nearest_racket(ball.x < 0.0 ? 0 : 1, ball);
      end_rally(out, loser, "out");
    } else if (!state_.side_has_hit) {
      try_hit(out);
    }

    ++state_.steps;
    out.done = state_.finished;
    out.truncated = !out.done && state_.steps >= cfg_.max_steps;
    out.observations = observations();
    return out;
  }

  Vector worker_observation(std::size_t agent) const override {
    const AgentSpec& spec = roster_.at(agent);
    const int team = spec.team;
    std::vector<double> v;
    v.reserve(spec.observation_dim);
    append_point(v, state_.ball_position, team);
    append_velocity(v, state_.ball_velocity, team);
    const RacketState& r = state_.rackets[agent];
    append_point(v, r.position, team);
    append_velocity(v, r.velocity, team);
    if (cfg_.extended_observation) {
      const std::size_t mate = teammate(agent);
      const RacketState& m = state_.rackets[mate];
      append_point(v, m.position, team);
      append_velocity(v, m.velocity, team);
      v.push_back(distance(r.position, m.position) / cfg_.half_length);
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  std::vector<std::string> manager_quantities() const override {
    std::vector<std::string> q = {"worker_obs",         "own_worker_obs",     "ball_racket_distance",
                                  "prev_ball_position", "prev_ball_velocity", "prev_racket_positions"};
    if (cfg_.players_per_side == 2) q.push_back("teammate_distance");
    return q;
  }

  void append_quantity(std::string_view name, int team, std::vector<double>& out) const override {
    const auto order = agents_from(team);
    if (name == "worker_obs" || name == "own_worker_obs") {
      for (std::size_t i : order) {
        if (name == "own_worker_obs" && roster_[i].team != team) continue;
        const Vector o = worker_observation(i);
        out.insert(out.end(), o.data(), o.data() + o.size());
      }
    } else if (name == "ball_racket_distance") {
      for (std::size_t i : order) {
        out.push_back(distance(state_.ball_position, state_.rackets[i].position) / cfg_.half_length);
      }
    } else if (name == "prev_ball_position") {
      append_point(out, state_.previous_ball_position, team);
    } else if (name == "prev_ball_velocity") {
      append_velocity(out, state_.previous_ball_velocity, team);
    } else if (name == "prev_racket_positions") {
      for (std::size_t i : order) append_point(out, state_.previous_racket_positions[i], team);
    } else if (name == "teammate_distance" && cfg_.players_per_side == 2) {
      for (int t : {team, 1 - team}) {
        const auto members = team_members(t);
        out.push_back(distance(state_.rackets[members[0]].position, state_.rackets[members[1]].position) /
                      cfg_.half_length);
      }
    } else {
      throw ConfigError("manager_obs_recipe", "tennis does not provide quantity '" + std::string(name) + "'");
    }
  }

 private:
  static double side_sign(int team) { return team == 0 ? 1.0 : -1.0; }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  void append_point(std::vector<double>& v, Vec2 p, int team) const {
    v.push_back(side_sign(team) * p.x / cfg_.half_length);
    v.push_back(p.y / cfg_.half_length);
  }

  void append_velocity(std::vector<double>& v, Vec2 p, int team) const {
    v.push_back(side_sign(team) * p.x * kVelocityScale);
    v.push_back(p.y * kVelocityScale);
  }

  std::vector<std::size_t> team_members(int team) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      if (roster_[i].team == team) out.push_back(i);
    }
    return out;
  }

  /// Roster indices with `team`'s agents first.
  std::vector<std::size_t> agents_from(int team) const {
    auto out = team_members(team);
    const auto rest = team_members(1 - team);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  std::size_t teammate(std::size_t agent) const {
    for (std::size_t i : team_members(roster_[agent].team)) {
      if (i != agent) return i;
    }
    return agent;
  }

  std::size_t nearest_racket(int team, Vec2 ball) const {
    std::size_t best = 0;
    double best_d = kNoHit;
    for (std::size_t i : team_members(team)) {
      const double d = std::abs(state_.rackets[i].position.x - ball.x);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  Vec2 ballistic(Vec2 from, double land_x, double lift) const {
    const double g = cfg_.gravity;
    const double flight = (lift + std::sqrt(lift * lift + 2.0 * g * std::max(from.y, 0.0))) / g;
    return {(land_x - from.x) / flight, lift};
  }

  void move_racket(std::size_t i, const Action& a) {
    const int team = roster_[i].team;
    const double s = side_sign(team);
    RacketState& r = state_.rackets[i];
    const double drive = std::clamp(std::clamp(a[0], -1.0, 1.0) - std::clamp(a[1], -1.0, 1.0), -1.0, 1.0);
    r.velocity.x = s * drive * cfg_.racket_speed;
    const double lo = team == 0 ? -cfg_.half_length : cfg_.net_clearance;
    const double hi = team == 0 ? -cfg_.net_clearance : cfg_.half_length;
    const double x = std::clamp(r.position.x + r.velocity.x, lo, hi);
    r.velocity.x = x - r.position.x;
    r.position.x = x;

    if (!r.airborne && a[2] > cfg_.jump_threshold) {
      r.airborne = true;
      r.velocity.y = cfg_.jump_speed;
    }
    if (r.airborne) {
      r.position.y += r.velocity.y;
      r.velocity.y -= cfg_.gravity;
      if (r.position.y <= cfg_.racket_rest_height) {
        r.position.y = cfg_.racket_rest_height;
        r.velocity.y = 0.0;
        r.airborne = false;
      }
    }
  }

  void try_hit(StepResult& out) {
    const Vec2 ball = state_.ball_position;
    const int team = ball.x < 0.0 ? 0 : 1;
    int hitter = -1;
    double best = cfg_.racket_reach;
    for (std::size_t i : team_members(team)) {
      const double d = distance(ball, state_.rackets[i].position);
      if (d <= best) {
        best = d;
        hitter = static_cast<int>(i);
      }
    }
    if (hitter < 0) return;
    state_.last_hitter = hitter;
    state_.side_has_hit = true;
    const double land = side_sign(team) * uniform(cfg_.shot_depth_min, cfg_.shot_depth_max);
    state_.ball_velocity = ballistic(ball, land, uniform(cfg_.shot_lift_min, cfg_.shot_lift_max));
    out.events.push_back("hit:" + roster_[static_cast<std::size_t>(hitter)].id);
  }

  void end_rally(StepResult& out, std::size_t loser, std::string_view cause) {
    out.rewards[loser] += kTennisMissPenalty;
    out.events.push_back(std::string(cause) + ":" + roster_[loser].id);
    state_.finished = true;
  }

  TennisConfig cfg_;
  std::vector<AgentSpec> roster_;
  TennisState state_;
  std::mt19937_64 rng_;
};

}  // namespace hca_marl
