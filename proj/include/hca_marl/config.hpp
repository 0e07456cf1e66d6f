#pragma once

// Experiment configuration and its JSON form.
//
// Unknown keys are rejected with their full key path. `config_to_json`
// writes every field, fully resolved, so that its output re-parses to an
// identical configuration.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hca_marl/envs/factory.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/hca.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/ppo.hpp"
#include "hca_marl/rollout.hpp"
#include "json.hpp"

namespace hca_marl {

using Json = nlohmann::ordered_json;

enum class Algorithm { ppo, hca_ppo };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::ppo ? "ppo" : "hca_ppo"; }

inline Algorithm algorithm_from_string(std::string_view name) {
  if (name == "ppo") return Algorithm::ppo;
  if (name == "hca_ppo") return Algorithm::hca_ppo;
  throw ConfigError("algorithm", "unknown algorithm '" + std::string(name) + "' (expected ppo or hca_ppo)");
}

inline std::string_view to_string(AdvantageEstimator e) { return e == AdvantageEstimator::gae ? "gae" : "n_step"; }

struct NetworkConfig {
  std::vector<std::size_t> hidden = {128, 128};
  Activation activation = Activation::tanh;
  double actor_output_scale = 0.01;   // scales the initial weights of the last actor layer
  double critic_output_scale = 0.01;  // same for every critic
  double initial_log_std = 0.0;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;

  void validate() const {
    if (hidden.empty()) throw ConfigError("network.hidden", "needs at least one hidden layer");
    for (std::size_t h : hidden) {
      if (h == 0) throw ConfigError("network.hidden", "layer widths must be positive");
    }
    if (!(actor_output_scale > 0)) throw ConfigError("network.actor_output_scale", "must be positive");
    if (!(critic_output_scale > 0)) throw ConfigError("network.critic_output_scale", "must be positive");
    if (!(initial_log_std >= kLogStdMin && initial_log_std <= kLogStdMax)) {
      throw ConfigError("network.initial_log_std", "must lie in [-20, 2]");
    }
  }
};

struct ExperimentConfig {
  Scenario scenario = Scenario::tennis_1v1;
  Algorithm algorithm = Algorithm::ppo;
  HierarchySpec hierarchy;
  PpoConfig ppo;
  AdvantageConfig advantage;
  CriticSchedule schedule;
  NetworkConfig network;
  EnvOptions env;
  std::size_t total_steps = 100000;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t metrics_interval = 5000;
  std::size_t buffer_size = 2048;   // transitions per agent group between updates

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  void validate() const {
    ppo.validate();
    advantage.validate();
    schedule.validate();
    network.validate();
    env.tennis.validate();
    env.soccer.validate();
    hierarchy.validate();
    if (metrics_interval == 0) throw ConfigError("metrics_interval", "must be positive");
    if (buffer_size == 0) throw ConfigError("buffer_size", "must be positive");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    if (algorithm == Algorithm::ppo && !hierarchy.managers.empty()) {
      throw ConfigError("hierarchy.managers", "algorithm ppo takes no managers");
    }
    const auto env_ptr = make_env(scenario, env);
    std::vector<std::string> ids;
    for (const auto& a : env_ptr->roster()) ids.push_back(a.id);
    if (hierarchy.workers != ids) throw ConfigError("hierarchy.workers", "must list the scenario's agents in roster order");
    for (const auto& w : hierarchy.workers) {
      if (schedule.enabled && hierarchy.managers_of(w).empty()) {
        throw ConfigError("schedule.enabled", "worker '" + w + "' has no manager critic for the schedule");
      }
    }
    for (const auto& m : hierarchy.managers) {
      const auto workers = hierarchy.workers_of(m.id);
      if (workers.empty()) throw ConfigError("hierarchy.assignment", "manager '" + m.id + "' has no workers");
      const int team = env_ptr->roster()[env_ptr->agent_index(workers.front())].team;
      const Vector obs = manager_observation(*env_ptr, m.recipe, team);
      if (m.share_local_critic) {
        for (const auto& w : workers) {
          const auto& spec = env_ptr->roster()[env_ptr->agent_index(w)];
          if (static_cast<std::size_t>(obs.size()) != spec.observation_dim) {
            throw ConfigError("hierarchy.managers." + m.id + ".share_local_critic",
                              "needs a recipe with the worker observation dimension");
          }
        }
      }
    }
  }
};

/// Per-team managers (or one shared manager) over every worker, using `recipe`.
inline HierarchySpec default_hierarchy(Scenario scenario, const std::vector<std::string>& recipe, bool shared,
                                       bool share_local_critic = false) {
  const auto env = make_env(scenario);
  HierarchySpec h;
  for (const auto& a : env->roster()) h.workers.push_back(a.id);
  if (shared) {
    h.managers.push_back({"manager", recipe, share_local_critic});
    for (const auto& a : env->roster()) h.assignment[a.id] = {"manager"};
  } else {
    for (int team = 0; team < 2; ++team) {
      const std::string id = "manager_" + std::to_string(team);
      h.managers.push_back({id, recipe, share_local_critic});
      for (const auto& a : env->roster()) {
        if (a.team == team) h.assignment[a.id].push_back(id);
      }
    }
  }
  return h;
}

inline std::vector<std::string> default_recipe(Scenario scenario) {
  return is_tennis(scenario) ? std::vector<std::string>{"M1"} : std::vector<std::string>{"soccer_manager"};
}

namespace detail {

inline std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void read_value(const Json& j, const std::string& path, double& out) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  out = j.get<double>();
}

inline void read_value(const Json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  out = j.get<bool>();
}

template <class T>
  requires(std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
void read_value(const Json& j, const std::string& path, T& out) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  out = j.get<T>();
}

inline void read_value(const Json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  out = j.get<std::string>();
}

template <class T>
void read_value(const Json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    read_value(j[i], path + "[" + std::to_string(i) + "]", v);
    out.push_back(v);
  }
}

/// Reads keys out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const Json* c = child(key)) read_value(*c, path(key), out);
  }

  std::string path(const std::string& key) const { return join_key(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class C, class F>
void ppo_fields(C& c, F&& f) {
  f("clip_epsilon", c.clip_epsilon);
  f("entropy_beta", c.entropy_beta);
  f("value_loss_coeff", c.value_loss_coeff);
  f("epochs", c.epochs);
  f("minibatch_size", c.minibatch_size);
  f("learning_rate", c.learning_rate);
}

template <class C, class F>
void schedule_fields(C& c, F&& f) {
  f("enabled", c.enabled);
  f("period", c.period);
  f("active_window", c.active_window);
}

template <class C, class F>
void tennis_fields(C& c, F&& f) {
  f("extended_observation", c.extended_observation);
  f("half_length", c.half_length);
  f("ceiling", c.ceiling);
  f("net_height", c.net_height);
  f("net_clearance", c.net_clearance);
  f("gravity", c.gravity);
  f("racket_speed", c.racket_speed);
  f("racket_reach", c.racket_reach);
  f("racket_rest_height", c.racket_rest_height);
  f("jump_speed", c.jump_speed);
  f("jump_threshold", c.jump_threshold);
  f("shot_depth_min", c.shot_depth_min);
  f("shot_depth_max", c.shot_depth_max);
  f("shot_lift_min", c.shot_lift_min);
  f("shot_lift_max", c.shot_lift_max);
  f("serve_height", c.serve_height);
  f("max_steps", c.max_steps);
}

template <class C, class F>
void soccer_fields(C& c, F&& f) {
  f("half_length", c.half_length);
  f("half_width", c.half_width);
  f("goal_half_width", c.goal_half_width);
  f("agent_radius", c.agent_radius);
  f("ball_radius", c.ball_radius);
  f("striker_speed", c.striker_speed);
  f("goalie_speed", c.goalie_speed);
  f("turn_rate", c.turn_rate);
  f("kick_speed", c.kick_speed);
  f("ball_friction", c.ball_friction);
  f("worker_ray_range", c.worker_ray_range);
  f("max_steps", c.max_steps);
  f("literal_goalie_reward", c.literal_goalie_reward);
}

template <class F>
void read_block(ObjectReader& parent, const std::string& key, F&& fields) {
  const Json* j = parent.child(key);
  if (!j) return;
  ObjectReader r(*j, parent.path(key));
  fields(r);
  r.finish();
}

inline HierarchySpec parse_hierarchy(const Json& j, const std::string& path, const ExperimentConfig& cfg) {
  ObjectReader r(j, path);
  HierarchySpec h;
  const auto env = make_env(cfg.scenario, cfg.env);
  for (const auto& a : env->roster()) h.workers.push_back(a.id);
  r.read("workers", h.workers);

  std::string layout = "per_team";
  std::vector<std::string> recipe = default_recipe(cfg.scenario);
  bool share = false;
  r.read("layout", layout);
  r.read("manager_obs_recipe", recipe);
  r.read("share_local_critic", share);
  if (layout != "per_team" && layout != "shared") {
    throw ConfigError(r.path("layout"), "expected per_team or shared");
  }

  const Json* managers = r.child("managers");
  const Json* assignment = r.child("assignment");
  r.finish();

  if (!managers) {
    if (assignment) throw ConfigError(r.path("assignment"), "requires an explicit managers list");
    if (cfg.algorithm == Algorithm::ppo) return h;
    HierarchySpec out = default_hierarchy(cfg.scenario, recipe, layout == "shared", share);
    out.workers = h.workers;
    return out;
  }

  if (!managers->is_array()) throw ConfigError(r.path("managers"), "expected an array");
  for (std::size_t i = 0; i < managers->size(); ++i) {
    ObjectReader mr((*managers)[i], r.path("managers") + "[" + std::to_string(i) + "]");
    ManagerSpec m;
    m.recipe = recipe;
    m.share_local_critic = share;
    mr.read("id", m.id);
    mr.read("manager_obs_recipe", m.recipe);
    mr.read("share_local_critic", m.share_local_critic);
    mr.finish();
    h.managers.push_back(std::move(m));
  }
  if (assignment) {
    if (!assignment->is_object()) throw ConfigError(r.path("assignment"), "expected an object");
    for (auto it = assignment->begin(); it != assignment->end(); ++it) {
      std::vector<std::string> ids;
      read_value(it.value(), r.path("assignment") + "." + it.key(), ids);
      h.assignment[it.key()] = ids;
    }
  } else {
    if (h.managers.size() > 1) throw ConfigError(r.path("assignment"), "required when there is more than one manager");
    if (h.managers.size() == 1) {
      for (const auto& w : h.workers) h.assignment[w] = {h.managers.front().id};
    }
  }
  return h;
}

}  // namespace detail

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(const Json& j) {
  using detail::ObjectReader;
  ExperimentConfig cfg;
  ObjectReader r(j, "");

  std::string s = std::string(to_string(cfg.scenario));
  r.read("scenario", s);
  cfg.scenario = scenario_from_string(s);
  s = std::string(to_string(cfg.algorithm));
  r.read("algorithm", s);
  cfg.algorithm = algorithm_from_string(s);

  r.read("total_steps", cfg.total_steps);
  r.read("seeds", cfg.seeds);
  r.read("metrics_interval", cfg.metrics_interval);
  r.read("buffer_size", cfg.buffer_size);

  detail::read_block(r, "ppo", [&](ObjectReader& b) {
    detail::ppo_fields(cfg.ppo, [&](const char* k, auto& v) { b.read(k, v); });
  });
  detail::read_block(r, "advantage", [&](ObjectReader& b) {
    b.read("gamma", cfg.advantage.gamma);
    b.read("lambda", cfg.advantage.lambda);
    b.read("n", cfg.advantage.n);
    b.read("normalize", cfg.advantage.normalize);
    std::string est(to_string(cfg.advantage.estimator));
    b.read("estimator", est);
    if (est == "gae") {
      cfg.advantage.estimator = AdvantageEstimator::gae;
    } else if (est == "n_step") {
      cfg.advantage.estimator = AdvantageEstimator::n_step;
    } else {
      throw ConfigError(b.path("estimator"), "expected gae or n_step");
    }
  });
  detail::read_block(r, "schedule", [&](ObjectReader& b) {
    detail::schedule_fields(cfg.schedule, [&](const char* k, auto& v) { b.read(k, v); });
  });
  detail::read_block(r, "network", [&](ObjectReader& b) {
    b.read("hidden", cfg.network.hidden);
    b.read("actor_output_scale", cfg.network.actor_output_scale);
    b.read("critic_output_scale", cfg.network.critic_output_scale);
    b.read("initial_log_std", cfg.network.initial_log_std);
    std::string act(to_string(cfg.network.activation));
    b.read("activation", act);
    try {
      cfg.network.activation = activation_from_string(act);
    } catch (const std::exception&) {
      throw ConfigError(b.path("activation"), "expected tanh, relu or identity");
    }
  });
  detail::read_block(r, "env", [&](ObjectReader& b) {
    if (is_tennis(cfg.scenario)) {
      detail::tennis_fields(cfg.env.tennis, [&](const char* k, auto& v) { b.read(k, v); });
    } else {
      detail::soccer_fields(cfg.env.soccer, [&](const char* k, auto& v) { b.read(k, v); });
    }
  });
  cfg.env.tennis.players_per_side = cfg.scenario == Scenario::tennis_2v2 ? 2 : 1;

  if (const Json* h = r.child("hierarchy")) {
    cfg.hierarchy = detail::parse_hierarchy(*h, "hierarchy", cfg);
  } else {
    cfg.hierarchy = detail::parse_hierarchy(Json::object(), "hierarchy", cfg);
  }
  r.finish();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Fully resolved document; `parse_config(config_to_json(c)) == c`.
inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["scenario"] = to_string(cfg.scenario);
  j["algorithm"] = to_string(cfg.algorithm);
  j["total_steps"] = cfg.total_steps;
  j["seeds"] = cfg.seeds;
  j["metrics_interval"] = cfg.metrics_interval;
  j["buffer_size"] = cfg.buffer_size;

  Json& p = j["ppo"];
  detail::ppo_fields(cfg.ppo, [&](const char* k, const auto& v) { p[k] = v; });
  j["advantage"] = {{"estimator", to_string(cfg.advantage.estimator)},
                    {"gamma", cfg.advantage.gamma},
                    {"lambda", cfg.advantage.lambda},
                    {"n", cfg.advantage.n},
                    {"normalize", cfg.advantage.normalize}};
  Json& s = j["schedule"];
  detail::schedule_fields(cfg.schedule, [&](const char* k, const auto& v) { s[k] = v; });
  j["network"] = {{"hidden", cfg.network.hidden},
                  {"activation", to_string(cfg.network.activation)},
                  {"actor_output_scale", cfg.network.actor_output_scale},
                  {"critic_output_scale", cfg.network.critic_output_scale},
                  {"initial_log_std", cfg.network.initial_log_std}};
  Json& e = j["env"];
  e = Json::object();
  if (is_tennis(cfg.scenario)) {
    detail::tennis_fields(cfg.env.tennis, [&](const char* k, const auto& v) { e[k] = v; });
  } else {
    detail::soccer_fields(cfg.env.soccer, [&](const char* k, const auto& v) { e[k] = v; });
  }

  Json h;
  h["workers"] = cfg.hierarchy.workers;
  h["managers"] = Json::array();
  for (const auto& m : cfg.hierarchy.managers) {
    h["managers"].push_back({{"id", m.id}, {"manager_obs_recipe", m.recipe}, {"share_local_critic", m.share_local_critic}});
  }
  h["assignment"] = Json::object();
  for (const auto& w : cfg.hierarchy.workers) {
    const auto& mids = cfg.hierarchy.managers_of(w);
    if (!mids.empty()) h["assignment"][w] = mids;
  }
  j["hierarchy"] = h;
  return j;
}

/// Resolved defaults for `scenario` and `algorithm`, as a document.
inline Json default_config_json(Scenario scenario, Algorithm algorithm) {
  Json j = {{"scenario", to_string(scenario)}, {"algorithm", to_string(algorithm)}};
  return config_to_json(parse_config(j));
}

}  // namespace hca_marl
