#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"

namespace hca_marl {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Moment accumulators for one ordered list of parameter blocks.
struct AdamState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  AdamState() = default;

  AdamState(std::span<const std::span<double>> params, AdamConfig cfg) : config(cfg) {
    for (const auto& block : params) {
      first_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(block.size())));
      second_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(block.size())));
    }
  }

  AdamState(Mlp& net, AdamConfig cfg) : AdamState(net.parameter_blocks(), cfg) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update over matching parameter/gradient blocks.
/// Throws NonFiniteError, leaving parameters and state untouched, if any gradient is non-finite.
inline void adam_step(std::span<const std::span<double>> params,
                      std::span<const std::span<const double>> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() ||
        static_cast<Eigen::Index>(params[b].size()) != state.first_moment[b].size()) {
      throw ShapeError("adam_step: block " + std::to_string(b) + " size mismatch");
    }
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        throw NonFiniteError("adam_step: non-finite gradient in block " + std::to_string(b) +
                             " at index " + std::to_string(i));
      }
    }
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    Vector& m = state.first_moment[b];
    Vector& v = state.second_moment[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double g = grads[b][i];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

inline void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state) {
  const auto params = net.parameter_blocks();
  const auto g = grads.blocks();
  adam_step(params, g, state);
}

}  // namespace hca_marl
