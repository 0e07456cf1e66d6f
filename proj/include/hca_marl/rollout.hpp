#pragma once

// Per-agent trajectories and the return/advantage estimators computed on them.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"

namespace hca_marl {

struct Transition {
  Vector state;
  std::vector<Vector> manager_states;  // one per manager critic, in critic order
  Action action;
  double log_prob_old = 0.0;
  double reward = 0.0;
  bool done = false;
  std::vector<double> value_estimates;  // local critic first, then managers
};

struct Trajectory {
  std::vector<Transition> transitions;
  // Per-critic value of the state following the last transition; zeros if it was terminal.
  std::vector<double> bootstrap_values;

  std::size_t size() const { return transitions.size(); }
  bool terminal() const { return !transitions.empty() && transitions.back().done; }
  std::size_t critic_count() const { return bootstrap_values.size(); }

  std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(transitions.size());
    for (const auto& t : transitions) r.push_back(t.reward);
    return r;
  }

  /// Values of critic `c` along the trajectory.
  std::vector<double> values(std::size_t c = 0) const {
    std::vector<double> v;
    v.reserve(transitions.size());
    for (const auto& t : transitions) v.push_back(t.value_estimates.at(c));
    return v;
  }

  /// Throws ShapeError unless every transition carries the same critic count
  /// as `bootstrap_values` and only the last one may be terminal.
  void validate() const {
    if (bootstrap_values.empty()) throw ShapeError("trajectory has no bootstrap values");
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      const auto& t = transitions[i];
      if (t.value_estimates.size() != bootstrap_values.size()) {
        throw ShapeError("transition " + std::to_string(i) + " carries " +
                         std::to_string(t.value_estimates.size()) + " value estimates, expected " +
                         std::to_string(bootstrap_values.size()));
      }
      if (t.manager_states.size() + 1 != t.value_estimates.size()) {
        throw ShapeError("transition " + std::to_string(i) + " manager state count mismatch");
      }
      if (t.done && i + 1 != transitions.size()) {
        throw ShapeError("only the final transition of a trajectory may be terminal");
      }
    }
  }
};

enum class AdvantageEstimator { n_step, gae };

struct AdvantageConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  AdvantageEstimator estimator = AdvantageEstimator::gae;
  std::size_t n = 5;
  bool normalize = true;

  friend bool operator==(const AdvantageConfig&, const AdvantageConfig&) = default;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("advantage.gamma", "must lie in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("advantage.lambda", "must lie in [0, 1]");
    if (n == 0) throw ConfigError("advantage.n", "must be positive");
  }
};

/// R_t = r_t + gamma * R_{t+1}, seeded with `bootstrap` past the last reward.
inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma, double bootstrap) {
  std::vector<double> out(rewards.size());
  double running = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

namespace detail {

inline void check_lengths(std::size_t rewards, std::size_t values) {
  if (rewards != values) {
    throw ShapeError("value sequence has length " + std::to_string(values) + " but trajectory has " +
                     std::to_string(rewards) + " transitions");
  }
}

}  // namespace detail

/// Truncated n-step advantage. `bootstrap` is V of the state after the last
/// reward; pass 0 for terminal segments.
inline std::vector<double> n_step_advantage(std::span<const double> rewards, std::span<const double> values,
                                            double bootstrap, const AdvantageConfig& cfg) {
  detail::check_lengths(rewards.size(), values.size());
  const std::size_t len = rewards.size();
  std::vector<double> out(len);
  for (std::size_t t = 0; t < len; ++t) {
    const std::size_t k = std::min(cfg.n, len - t);
    double acc = 0.0;
    double discount = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      acc += discount * rewards[t + i];
      discount *= cfg.gamma;
    }
    const double tail = t + k < len ? values[t + k] : bootstrap;
    out[t] = acc + discount * tail - values[t];
  }
  return out;
}

/// GAE(lambda) with the terminal mask applied at the final transition only.
inline std::vector<double> gae_advantage(std::span<const double> rewards, std::span<const double> values,
                                         double bootstrap, bool terminal, const AdvantageConfig& cfg) {
  detail::check_lengths(rewards.size(), values.size());
  const std::size_t len = rewards.size();
  std::vector<double> out(len);
  double next_adv = 0.0;
  for (std::size_t t = len; t-- > 0;) {
    const bool is_done = terminal && t + 1 == len;
    const double mask = is_done ? 0.0 : 1.0;
    const double next_value = t + 1 < len ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + cfg.gamma * next_value * mask - values[t];
    next_adv = delta + cfg.gamma * cfg.lambda * mask * next_adv;
    out[t] = next_adv;
  }
  return out;
}

inline std::vector<double> n_step_advantage(const Trajectory& traj, std::span<const double> values,
                                            const AdvantageConfig& cfg) {
  const auto r = traj.rewards();
  const double boot = traj.terminal() ? 0.0 : traj.bootstrap_values.at(0);
  return n_step_advantage(r, values, boot, cfg);
}

inline std::vector<double> gae_advantage(const Trajectory& traj, std::span<const double> values,
                                         const AdvantageConfig& cfg) {
  const auto r = traj.rewards();
  const double boot = traj.terminal() ? 0.0 : traj.bootstrap_values.at(0);
  return gae_advantage(r, values, boot, traj.terminal(), cfg);
}

/// Dispatches on `cfg.estimator`.
inline std::vector<double> estimate_advantages(std::span<const double> rewards, std::span<const double> values,
                                               double bootstrap, bool terminal, const AdvantageConfig& cfg) {
  const double boot = terminal ? 0.0 : bootstrap;
  if (cfg.estimator == AdvantageEstimator::n_step) return n_step_advantage(rewards, values, boot, cfg);
  return gae_advantage(rewards, values, boot, terminal, cfg);
}

/// Zero mean, unit population standard deviation. Near-constant input is only centred.
inline std::vector<double> normalize_advantages(std::span<const double> adv) {
  if (adv.empty()) throw ShapeError("normalize_advantages: empty input");
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    out[i] = sd < 1e-8 ? adv[i] - mean : (adv[i] - mean) / sd;
  }
  return out;
}

}  // namespace hca_marl
