#pragma once

// Line-delimited JSON episode log: one object per step with the step index,
// a per-agent FNV-1a hash of the observation bytes, the actions, rewards and
// the done flag. Two replays of the same seed produce identical logs.

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hca_marl/envs/env.hpp"

namespace hca_marl {

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string observation_hash(const Vector& obs) {
  const auto* p = reinterpret_cast<const unsigned char*>(obs.data());
  const std::uint64_t h = fnv1a64({p, static_cast<std::size_t>(obs.size()) * sizeof(double)});
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

/// One log line for the step that started from `observations` and applied `actions`.
inline std::string episode_log_line(std::size_t step, std::span<const Vector> observations,
                                    std::span<const Action> actions, const StepResult& result) {
  nlohmann::json j;
  j["step"] = step;
  auto hashes = nlohmann::json::array();
  for (const auto& o : observations) hashes.push_back(observation_hash(o));
  j["obs_hash"] = std::move(hashes);
  auto acts = nlohmann::json::array();
  for (const auto& a : actions) acts.push_back(a);
  j["action"] = std::move(acts);
  j["reward"] = result.rewards;
  j["done"] = result.done || result.truncated;
  return j.dump();
}

class EpisodeLogger {
 public:
  explicit EpisodeLogger(std::ostream& out) : out_(out) {}

  void record(std::size_t step, std::span<const Vector> observations, std::span<const Action> actions,
              const StepResult& result) {
    out_ << episode_log_line(step, observations, actions, result) << '\n';
  }

 private:
  std::ostream& out_;
};

}  // namespace hca_marl
