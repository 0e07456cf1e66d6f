#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "hca_marl/envs/soccer.hpp"
#include "hca_marl/envs/tennis.hpp"
#include "hca_marl/error.hpp"

namespace hca_marl {

enum class Scenario { tennis_1v1, tennis_2v2, soccer_2v2 };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::tennis_1v1: return "tennis_1v1";
    case Scenario::tennis_2v2: return "tennis_2v2";
    case Scenario::soccer_2v2: return "soccer_2v2";
  }
  return "unknown";
}

inline Scenario scenario_from_string(std::string_view name) {
  if (name == "tennis_1v1") return Scenario::tennis_1v1;
  if (name == "tennis_2v2") return Scenario::tennis_2v2;
  if (name == "soccer_2v2") return Scenario::soccer_2v2;
  throw ConfigError("scenario", "unknown scenario '" + std::string(name) + "'");
}

inline bool is_tennis(Scenario s) { return s != Scenario::soccer_2v2; }

/// Environment options; only the block matching the scenario is used.
struct EnvOptions {
  TennisConfig tennis;
  SoccerConfig soccer;

  friend bool operator==(const EnvOptions&, const EnvOptions&) = default;
};

inline std::unique_ptr<MultiAgentEnv> make_env(Scenario scenario, const EnvOptions& options = {}) {
  if (scenario == Scenario::soccer_2v2) return std::make_unique<SoccerEnv>(options.soccer);
  TennisConfig cfg = options.tennis;
  cfg.players_per_side = scenario == Scenario::tennis_1v1 ? 1 : 2;
  return std::make_unique<TennisEnv>(cfg);
}

}  // namespace hca_marl
