#pragma once

// Clipped-surrogate PPO: losses, their analytic gradients, and the
// epoch/minibatch update loop over one actor and any number of critics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hca_marl/adam.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"

namespace hca_marl {

struct PpoConfig {
  double clip_epsilon = 0.2;
  double entropy_beta = 5e-3;
  double value_loss_coeff = 0.5;
  std::size_t epochs = 3;
  std::size_t minibatch_size = 256;
  double learning_rate = 1e-3;

  friend bool operator==(const PpoConfig&, const PpoConfig&) = default;

  void validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("ppo.clip_epsilon", "must lie in (0, 1)");
    if (!(entropy_beta >= 0.0)) throw ConfigError("ppo.entropy_beta", "must be non-negative");
    if (!(value_loss_coeff > 0.0)) throw ConfigError("ppo.value_loss_coeff", "must be positive");
    if (epochs == 0) throw ConfigError("ppo.epochs", "must be positive");
    if (minibatch_size == 0) throw ConfigError("ppo.minibatch_size", "must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate", "must be positive");
  }
};

/// Regression sample for one critic network. `head` selects the output row
/// for networks with one value head per worker.
struct CriticSample {
  std::size_t critic = 0;
  std::size_t head = 0;
  Vector input;
  double target = 0.0;
};

struct UpdateBatch {
  std::vector<Vector> states;
  std::vector<Action> actions;
  std::vector<double> log_probs_old;
  std::vector<double> advantages;
  std::vector<std::vector<CriticSample>> value_targets;  // per sample, one entry per trained critic

  std::size_t size() const { return states.size(); }

  void validate() const {
    const std::size_t n = states.size();
    if (n == 0) throw ShapeError("update batch is empty");
    if (actions.size() != n || log_probs_old.size() != n || advantages.size() != n ||
        value_targets.size() != n) {
      throw ShapeError("update batch sequences are not aligned");
    }
  }
};

struct CriticSlot {
  Mlp* net = nullptr;
  AdamState* optimizer = nullptr;
};

struct PpoLoss {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  std::size_t ratio_overflows = 0;
};

struct PpoGradients {
  PolicyGradients actor;
  std::vector<MlpGradients> critics;
};

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::size_t minibatches = 0;
  std::size_t ratio_overflows = 0;
};

inline constexpr double kMaxLogRatio = 20.0;

/// exp(log_prob_new - log_prob_old); the exponent is capped at kMaxLogRatio
/// and each capped call bumps `*overflow_count`.
inline double probability_ratio(double log_prob_new, double log_prob_old, std::size_t* overflow_count = nullptr) {
  double d = log_prob_new - log_prob_old;
  if (d > kMaxLogRatio) {
    d = kMaxLogRatio;
    if (overflow_count) ++*overflow_count;
  }
  return std::exp(d);
}

inline double clipped_surrogate(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

/// d clipped_surrogate / d log_prob_new, given ratio = exp(log_prob_new - old).
inline double clipped_surrogate_log_prob_grad(double ratio, double advantage, double clip_epsilon) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
  const bool inside = ratio >= 1.0 - clip_epsilon && ratio <= 1.0 + clip_epsilon;
  if (unclipped <= clipped || inside) return unclipped;
  return 0.0;
}

/// 0.5 * mean((predicted - target)^2)
inline double value_loss(std::span<const double> predicted, std::span<const double> targets) {
  if (predicted.size() != targets.size()) throw ShapeError("value_loss: length mismatch");
  if (predicted.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - targets[i];
    acc += d * d;
  }
  return 0.5 * acc / static_cast<double>(predicted.size());
}

namespace detail {

inline Matrix stack_columns(std::span<const Vector> vs, std::span<const std::size_t> idx) {
  if (idx.empty()) return Matrix();
  Matrix m(vs[idx[0]].size(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) m.col(static_cast<Eigen::Index>(b)) = vs[idx[b]];
  return m;
}

}  // namespace detail

/// Total PPO loss over the samples `indices` of `batch`:
///   -mean(clipped surrogate) + value_loss_coeff * sum_c L_c - entropy_beta * mean(entropy)
/// where L_c = sum over critic c's samples of 0.5 (v - target)^2 / |indices|.
/// When `grads` is non-null it receives the analytic gradient.
inline PpoLoss ppo_loss(const PolicyHead& actor, std::span<const Mlp* const> critics, const UpdateBatch& batch,
                        std::span<const std::size_t> indices, const PpoConfig& cfg, PpoGradients* grads) {
  if (indices.empty()) throw ShapeError("ppo_loss: empty minibatch");
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  PpoLoss loss;

  const Matrix states = detail::stack_columns(batch.states, indices);
  std::vector<Action> mb_actions;
  mb_actions.reserve(indices.size());
  for (std::size_t i : indices) mb_actions.push_back(batch.actions[i]);
  const Matrix actions = action_matrix(actor, mb_actions);
  const PolicyBatchEval eval = evaluate_batch(actor, states, actions);

  const auto b_count = static_cast<Eigen::Index>(indices.size());
  Vector dlogp(b_count);
  Vector dentropy = Vector::Constant(b_count, -cfg.entropy_beta * inv_b);
  double surrogate_sum = 0.0;
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const std::size_t i = indices[static_cast<std::size_t>(b)];
    const double r = probability_ratio(eval.log_probs[b], batch.log_probs_old[i], &loss.ratio_overflows);
    const double adv = batch.advantages[i];
    surrogate_sum += clipped_surrogate(r, adv, cfg.clip_epsilon);
    dlogp[b] = -inv_b * clipped_surrogate_log_prob_grad(r, adv, cfg.clip_epsilon);
  }
  loss.policy = -surrogate_sum * inv_b;
  loss.entropy = eval.entropies.sum() * inv_b;

  if (grads) {
    grads->actor = policy_backward(actor, eval, actions, dlogp, dentropy);
    grads->critics.clear();
  }

  // Group critic samples per network so each critic runs one batched pass.
  std::vector<std::vector<const CriticSample*>> per_critic(critics.size());
  for (std::size_t i : indices) {
    for (const CriticSample& s : batch.value_targets[i]) {
      if (s.critic >= critics.size()) throw ShapeError("critic sample references unknown critic");
      per_critic[s.critic].push_back(&s);
    }
  }
  for (std::size_t c = 0; c < critics.size(); ++c) {
    const Mlp& net = *critics[c];
    const auto& samples = per_critic[c];
    if (samples.empty()) {
      if (grads) grads->critics.push_back(net.zero_gradients());
      continue;
    }
    Matrix inputs(static_cast<Eigen::Index>(net.input_dim()), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (samples[k]->input.size() != inputs.rows()) throw ShapeError("critic input dimension mismatch");
      if (samples[k]->head >= net.output_dim()) throw ShapeError("critic head index out of range");
      inputs.col(static_cast<Eigen::Index>(k)) = samples[k]->input;
    }
    const ForwardCache cache = net.forward_batch(inputs);
    Matrix dout = Matrix::Zero(cache.output().rows(), cache.output().cols());
    double sq = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const auto head = static_cast<Eigen::Index>(samples[k]->head);
      const double d = cache.output()(head, col) - samples[k]->target;
      sq += d * d;
      dout(head, col) = cfg.value_loss_coeff * d * inv_b;
    }
    loss.value += 0.5 * sq * inv_b;
    if (grads) grads->critics.push_back(net.backward(cache, dout));
  }

  loss.total = loss.policy + cfg.value_loss_coeff * loss.value - cfg.entropy_beta * loss.entropy;
  if (!std::isfinite(loss.total)) {
    throw NonFiniteError("non-finite PPO loss (policy=" + std::to_string(loss.policy) +
                         ", value=" + std::to_string(loss.value) + ", entropy=" + std::to_string(loss.entropy) + ")");
  }
  return loss;
}

/// `epochs` passes of shuffled minibatch Adam steps on the total PPO loss.
/// The shuffle draws from `rng`, so identical inputs and generator state give identical results.
template <class Rng>
UpdateDiagnostics ppo_update(PolicyHead& actor, AdamState& actor_optimizer, std::span<const CriticSlot> critics,
                             const UpdateBatch& batch, const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  batch.validate();
  if (critics.empty()) throw ShapeError("ppo_update needs at least one critic");

  std::vector<const Mlp*> nets;
  for (const auto& c : critics) nets.push_back(c.net);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  UpdateDiagnostics diag;
  PpoGradients grads;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.minibatch_size);
      const std::span<const std::size_t> mb(order.data() + start, end - start);
      const PpoLoss loss = ppo_loss(actor, nets, batch, mb, cfg, &grads);

      actor_optimizer.config.learning_rate = cfg.learning_rate;
      adam_step(parameter_blocks(actor), grads.actor.blocks(), actor_optimizer);
      if (auto* g = std::get_if<GaussianPolicyHead>(&actor)) g->clamp_log_std();
      for (std::size_t c = 0; c < critics.size(); ++c) {
        critics[c].optimizer->config.learning_rate = cfg.learning_rate;
        adam_step(*critics[c].net, grads.critics[c], *critics[c].optimizer);
      }

      diag.policy_loss += loss.policy;
      diag.value_loss += loss.value;
      diag.entropy += loss.entropy;
      diag.ratio_overflows += loss.ratio_overflows;
      ++diag.minibatches;
    }
  }
  if (diag.minibatches > 0) {
    const double n = static_cast<double>(diag.minibatches);
    diag.policy_loss /= n;
    diag.value_loss /= n;
    diag.entropy /= n;
  }
  return diag;
}

}  // namespace hca_marl
