#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"

namespace hca_marl {

enum class ActionKind { continuous, discrete };

/// Continuous: `size` is the action dimension. Discrete: `size` is the number of actions.
struct ActionSpec {
  ActionKind kind = ActionKind::continuous;
  std::size_t size = 0;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct AgentSpec {
  std::string id;
  int team = 0;
  std::string role;
  std::string group;  // agents in one group share an actor and local critic
  std::size_t observation_dim = 0;
  ActionSpec action;
};

struct StepResult {
  std::vector<Vector> observations;
  std::vector<double> rewards;
  bool done = false;       // terminal: the rally or match ended
  bool truncated = false;  // step limit reached without a terminal event
  std::vector<std::string> events;
};

/// Multi-agent environment with a fixed roster. Agents are addressed by roster index.
class MultiAgentEnv {
 public:
  virtual ~MultiAgentEnv() = default;

  virtual const std::vector<AgentSpec>& roster() const = 0;
  virtual std::vector<Vector> reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const Action> actions) = 0;
  virtual Vector worker_observation(std::size_t agent) const = 0;
  virtual std::size_t step_count() const = 0;

  /// Names accepted by `append_quantity`.
  virtual std::vector<std::string> manager_quantities() const = 0;

  /// Appends a named global quantity seen from `team`'s side. Throws ConfigError for unknown names.
  virtual void append_quantity(std::string_view name, int team, std::vector<double>& out) const = 0;

  StepResult step(const std::map<std::string, Action>& actions) {
    std::vector<Action> ordered;
    ordered.reserve(roster().size());
    for (const auto& a : roster()) {
      auto it = actions.find(a.id);
      if (it == actions.end()) throw ActionError("missing action for agent '" + a.id + "'");
      ordered.push_back(it->second);
    }
    if (actions.size() != roster().size()) {
      for (const auto& [id, _] : actions) {
        bool known = false;
        for (const auto& a : roster()) known = known || a.id == id;
        if (!known) throw ActionError("action given for unknown agent '" + id + "'");
      }
    }
    return step(std::span<const Action>(ordered));
  }

  std::vector<Vector> observations() const {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < roster().size(); ++i) out.push_back(worker_observation(i));
    return out;
  }

  std::size_t agent_index(std::string_view id) const {
    for (std::size_t i = 0; i < roster().size(); ++i) {
      if (roster()[i].id == id) return i;
    }
    throw ConfigError("", "unknown agent '" + std::string(id) + "'");
  }

 protected:
  /// Throws ActionError naming the agent when an action does not fit its spec.
  void check_actions(std::span<const Action> actions) const {
    const auto& agents = roster();
    if (actions.size() != agents.size()) {
      throw ActionError("expected " + std::to_string(agents.size()) + " actions, got " +
                        std::to_string(actions.size()));
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& spec = agents[i].action;
      const Action& a = actions[i];
      if (spec.kind == ActionKind::continuous) {
        if (a.size() != spec.size) {
          throw ActionError("agent '" + agents[i].id + "' expects a continuous action of size " +
                            std::to_string(spec.size) + ", got " + std::to_string(a.size()));
        }
        for (double v : a) {
          if (!std::isfinite(v)) throw ActionError("agent '" + agents[i].id + "' sent a non-finite action");
        }
      } else {
        const bool ok = a.size() == 1 && std::isfinite(a[0]) && a[0] == std::floor(a[0]) && a[0] >= 0.0 &&
                        a[0] < static_cast<double>(spec.size);
        if (!ok) {
          throw ActionError("agent '" + agents[i].id + "' expects one discrete action in [0, " +
                            std::to_string(spec.size) + ")");
        }
      }
    }
  }
};

}  // namespace hca_marl
