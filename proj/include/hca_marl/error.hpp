#pragma once

#include <stdexcept>
#include <string>

namespace hca_marl {

/// Dimension or shape disagreement between two objects that must line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity reached a place where training cannot continue.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration. `key_path()` names the offending entry, e.g. `ppo.clip_epsilon`.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::invalid_argument(key_path.empty() ? message : key_path + ": " + message),
        key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

/// Malformed or missing action handed to an environment.
class ActionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace hca_marl
