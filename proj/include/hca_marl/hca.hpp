#pragma once

// Hierarchical critic assignment.
//
// Every worker owns a local critic; managers contribute extra critics over
// broader observations. The value used for advantage estimation is the
// maximum over the critics active at that step. All critics regress to the
// same empirical returns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hca_marl/envs/env.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/rollout.hpp"

namespace hca_marl {

/// Periodic critic-count schedule: all m critics inside the first
/// `active_window` steps of every `period` steps, otherwise 2.
struct CriticSchedule {
  bool enabled = false;
  std::size_t period = 100;
  std::size_t active_window = 10;

  friend bool operator==(const CriticSchedule&, const CriticSchedule&) = default;

  void validate() const {
    if (period == 0) throw ConfigError("schedule.period", "must be positive");
    if (active_window == 0 || active_window > period) {
      throw ConfigError("schedule.active_window", "must lie in [1, period]");
    }
  }
};

inline std::size_t active_critic_count(std::size_t step, std::size_t total_critics, const CriticSchedule& schedule) {
  if (total_critics == 0) throw ShapeError("active_critic_count: no critics");
  if (!schedule.enabled) return total_critics;
  if (total_critics < 2) throw ConfigError("schedule.enabled", "the critic schedule needs at least 2 critics");
  schedule.validate();
  return step % schedule.period < schedule.active_window ? total_critics : 2;
}

/// Maximum over the critic values.
inline double fuse_values(std::span<const double> values) {
  if (values.empty()) throw ShapeError("fuse_values: empty value set");
  double best = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("fuse_values: non-finite critic value");
    best = std::max(best, v);
  }
  return best;
}

struct FusedValues {
  std::vector<double> values;  // per transition
  double bootstrap = 0.0;
};

/// Fused value per transition, where transition j sits at global step `start_step + j`.
inline FusedValues fused_values(const Trajectory& traj, const CriticSchedule& schedule, std::size_t start_step) {
  traj.validate();
  const std::size_t m = traj.critic_count();
  FusedValues out;
  out.values.reserve(traj.size());
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const std::size_t h = active_critic_count(start_step + j, m, schedule);
    const auto& v = traj.transitions[j].value_estimates;
    out.values.push_back(fuse_values(std::span<const double>(v.data(), h)));
  }
  const std::size_t h = active_critic_count(start_step + traj.size(), m, schedule);
  out.bootstrap = traj.terminal() ? 0.0 : fuse_values(std::span<const double>(traj.bootstrap_values.data(), h));
  return out;
}

/// Advantages computed by the configured estimator on the fused value trace.
inline std::vector<double> fused_advantages(const Trajectory& traj, const AdvantageConfig& cfg,
                                            const CriticSchedule& schedule, std::size_t start_step) {
  const FusedValues fused = fused_values(traj, schedule, start_step);
  const auto rewards = traj.rewards();
  return estimate_advantages(rewards, fused.values, fused.bootstrap, traj.terminal(), cfg);
}

/// Discounted returns bootstrapped from the fused value; the regression target of every critic.
inline std::vector<double> fused_value_targets(const Trajectory& traj, const AdvantageConfig& cfg,
                                               const CriticSchedule& schedule, std::size_t start_step) {
  const FusedValues fused = fused_values(traj, schedule, start_step);
  const auto rewards = traj.rewards();
  return discounted_returns(rewards, cfg.gamma, fused.bootstrap);
}

// ---------------------------------------------------------------------------
// Hierarchy description

struct ManagerSpec {
  std::string id;
  std::vector<std::string> recipe;  // quantity names, concatenated in order
  // The manager evaluates the worker's own local critic instead of a network of its own.
  bool share_local_critic = false;

  friend bool operator==(const ManagerSpec&, const ManagerSpec&) = default;
};

struct HierarchySpec {
  std::vector<std::string> workers;
  std::vector<ManagerSpec> managers;
  std::map<std::string, std::vector<std::string>> assignment;  // worker id -> manager ids

  friend bool operator==(const HierarchySpec&, const HierarchySpec&) = default;

  const ManagerSpec& manager(const std::string& id) const {
    for (const auto& m : managers) {
      if (m.id == id) return m;
    }
    throw ConfigError("hierarchy.managers", "unknown manager '" + id + "'");
  }

  std::size_t manager_index(const std::string& id) const {
    for (std::size_t i = 0; i < managers.size(); ++i) {
      if (managers[i].id == id) return i;
    }
    throw ConfigError("hierarchy.managers", "unknown manager '" + id + "'");
  }

  /// Workers assigned to manager `id`, in worker order. A worker's position here is its value head.
  std::vector<std::string> workers_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& w : workers) {
      auto it = assignment.find(w);
      if (it == assignment.end()) continue;
      if (std::find(it->second.begin(), it->second.end(), id) != it->second.end()) out.push_back(w);
    }
    return out;
  }

  const std::vector<std::string>& managers_of(const std::string& worker) const {
    static const std::vector<std::string> none;
    auto it = assignment.find(worker);
    return it == assignment.end() ? none : it->second;
  }

  void validate() const {
    std::set<std::string> worker_ids(workers.begin(), workers.end());
    if (worker_ids.size() != workers.size()) throw ConfigError("hierarchy.workers", "duplicate worker id");
    std::set<std::string> manager_ids;
    for (const auto& m : managers) {
      if (m.id.empty()) throw ConfigError("hierarchy.managers", "manager id must not be empty");
      if (!manager_ids.insert(m.id).second) throw ConfigError("hierarchy.managers", "duplicate manager '" + m.id + "'");
      if (worker_ids.contains(m.id)) {
        throw ConfigError("hierarchy.managers", "'" + m.id + "' is both a worker and a manager");
      }
      if (m.recipe.empty()) throw ConfigError("hierarchy.managers." + m.id + ".recipe", "must not be empty");
    }
    for (const auto& [worker, mids] : assignment) {
      if (manager_ids.contains(worker)) {
        throw ConfigError("hierarchy.assignment." + worker, "managers cannot have managers");
      }
      if (!worker_ids.contains(worker)) throw ConfigError("hierarchy.assignment." + worker, "unknown worker");
      std::set<std::string> seen;
      for (const auto& mid : mids) {
        if (!manager_ids.contains(mid)) throw ConfigError("hierarchy.assignment." + worker, "unknown manager '" + mid + "'");
        if (!seen.insert(mid).second) throw ConfigError("hierarchy.assignment." + worker, "manager listed twice");
      }
    }
  }
};

/// Expands named presets into quantity lists. Unknown names pass through unchanged.
///   M1 = worker_obs + ball_racket_distance
///   M2 = M1 + prev_ball_position
///   M3 = M2 + prev_ball_velocity
///   M4 = M3 + prev_racket_positions
///   identity = own_worker_obs
///   soccer_manager = ray_scan
inline std::vector<std::string> expand_recipe(const std::vector<std::string>& recipe) {
  std::vector<std::string> out;
  for (const auto& item : recipe) {
    if (item == "M1" || item == "M2" || item == "M3" || item == "M4") {
      out.insert(out.end(), {"worker_obs", "ball_racket_distance"});
      if (item >= "M2") out.push_back("prev_ball_position");
      if (item >= "M3") out.push_back("prev_ball_velocity");
      if (item >= "M4") out.push_back("prev_racket_positions");
    } else if (item == "identity") {
      out.push_back("own_worker_obs");
    } else if (item == "soccer_manager") {
      out.push_back("ray_scan");
    } else {
      out.push_back(item);
    }
  }
  return out;
}

/// Concatenates the recipe's quantities as seen from `team`.
inline Vector manager_observation(const MultiAgentEnv& env, const std::vector<std::string>& recipe, int team) {
  std::vector<double> v;
  for (const auto& q : expand_recipe(recipe)) env.append_quantity(q, team, v);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Read-only view of the critics that score one worker.
struct CriticSet {
  struct ManagerCritic {
    const Mlp* net = nullptr;  // null: evaluate the local critic
    std::size_t head = 0;
  };

  const Mlp* local = nullptr;
  std::vector<ManagerCritic> managers;

  std::size_t size() const { return 1 + managers.size(); }

  /// Value estimates, local first. `manager_inputs[k]` feeds manager critic k.
  std::vector<double> evaluate(const Vector& worker_obs, std::span<const Vector> manager_inputs) const {
    if (manager_inputs.size() != managers.size()) throw ShapeError("CriticSet: manager input count mismatch");
    std::vector<double> out;
    out.reserve(size());
    out.push_back(local->forward(worker_obs)[0]);
    for (std::size_t k = 0; k < managers.size(); ++k) {
      const Mlp& net = managers[k].net ? *managers[k].net : *local;
      const std::size_t head = managers[k].net ? managers[k].head : 0;
      out.push_back(net.forward(manager_inputs[k])[static_cast<Eigen::Index>(head)]);
    }
    return out;
  }
};

}  // namespace hca_marl
