#pragma once

// Policy heads: a diagonal Gaussian with state-independent log-std for
// continuous actions and a softmax categorical for discrete ones.
//
// Actions travel as real vectors. A categorical action is a one-element
// vector holding the action index.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "hca_marl/adam.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"

namespace hca_marl {

using Action = std::vector<double>;

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

/// Per-sample log-probabilities and entropies of a batch, plus what the
/// backward pass needs.
struct PolicyBatchEval {
  Vector log_probs;
  Vector entropies;
  ForwardCache cache;
  Matrix aux;  // standardized residuals (Gaussian) or probabilities (categorical)
};

struct PolicyGradients {
  MlpGradients net;
  Vector log_std;  // empty for categorical heads

  std::vector<std::span<const double>> blocks() const {
    auto out = net.blocks();
    if (log_std.size() > 0) out.emplace_back(log_std.data(), static_cast<std::size_t>(log_std.size()));
    return out;
  }
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline const double kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);
inline const double kHalfLogTwoPiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

struct GaussianPolicyHead {
  Mlp mean_net;
  Vector log_std;

  GaussianPolicyHead() = default;
  GaussianPolicyHead(Mlp net, double initial_log_std = 0.0)
      : mean_net(std::move(net)),
        log_std(Vector::Constant(static_cast<Eigen::Index>(mean_net.output_dim()), initial_log_std)) {}

  std::size_t state_dim() const { return mean_net.input_dim(); }
  std::size_t action_dim() const { return mean_net.output_dim(); }

  PolicyBatchEval evaluate(const Matrix& states, const Matrix& actions) const {
    if (actions.rows() != static_cast<Eigen::Index>(action_dim()) || actions.cols() != states.cols()) {
      throw ShapeError("Gaussian head: action batch has shape " + std::to_string(actions.rows()) + "x" +
                       std::to_string(actions.cols()) + ", expected " + std::to_string(action_dim()) + "x" +
                       std::to_string(states.cols()));
    }
    PolicyBatchEval e;
    e.cache = mean_net.forward_batch(states);
    const Vector inv_std = (-log_std.array()).exp().matrix();
    e.aux = ((actions - e.cache.output()).array().colwise() * inv_std.array()).matrix();
    const double dims = static_cast<double>(action_dim());
    const double log_std_sum = log_std.sum();
    e.log_probs = (-0.5 * e.aux.array().square().colwise().sum()).matrix().transpose();
    e.log_probs.array() -= log_std_sum + dims * kHalfLogTwoPi;
    e.entropies = Vector::Constant(states.cols(), dims * kHalfLogTwoPiE + log_std_sum);
    return e;
  }

  /// Gradients of sum_b (dlogp[b] * logp_b + dentropy[b] * H_b).
  PolicyGradients backward(const PolicyBatchEval& e, const Vector& dlogp, const Vector& dentropy) const {
    const Vector inv_std = (-log_std.array()).exp().matrix();
    Matrix dmean = (e.aux.array().colwise() * inv_std.array()).matrix();
    dmean.array().rowwise() *= dlogp.transpose().array();
    PolicyGradients g;
    g.net = mean_net.backward(e.cache, dmean);
    Matrix z2m1 = (e.aux.array().square() - 1.0).matrix();
    g.log_std = z2m1 * dlogp;
    g.log_std.array() += dentropy.sum();
    return g;
  }

  std::vector<std::span<double>> parameter_blocks() {
    auto out = mean_net.parameter_blocks();
    out.emplace_back(log_std.data(), static_cast<std::size_t>(log_std.size()));
    return out;
  }

  void clamp_log_std() { log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

  template <class Rng>
  Action sample(const Vector& state, Rng& rng) const {
    const Vector mean = mean_net.forward(state);
    std::normal_distribution<double> normal(0.0, 1.0);
    Action a(static_cast<std::size_t>(mean.size()));
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
      a[static_cast<std::size_t>(d)] = mean[d] + std::exp(log_std[d]) * normal(rng);
    }
    return a;
  }

  Action mode(const Vector& state) const {
    const Vector mean = mean_net.forward(state);
    return Action(mean.data(), mean.data() + mean.size());
  }

  Matrix action_matrix(std::span<const Action> actions) const {
    Matrix m(static_cast<Eigen::Index>(action_dim()), static_cast<Eigen::Index>(actions.size()));
    for (std::size_t b = 0; b < actions.size(); ++b) {
      if (actions[b].size() != action_dim()) {
        throw ShapeError("Gaussian head: action has length " + std::to_string(actions[b].size()) +
                         ", expected " + std::to_string(action_dim()));
      }
      for (std::size_t d = 0; d < action_dim(); ++d) {
        m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(b)) = actions[b][d];
      }
    }
    return m;
  }

  friend bool operator==(const GaussianPolicyHead& a, const GaussianPolicyHead& b) {
    return a.mean_net == b.mean_net && a.log_std == b.log_std;
  }
};

struct CategoricalPolicyHead {
  Mlp logit_net;

  CategoricalPolicyHead() = default;
  explicit CategoricalPolicyHead(Mlp net) : logit_net(std::move(net)) {}

  std::size_t state_dim() const { return logit_net.input_dim(); }
  std::size_t action_count() const { return logit_net.output_dim(); }

  static Matrix softmax(const Matrix& logits) {
    Matrix p = logits;
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
      const double mx = p.col(b).maxCoeff();
      p.col(b) = (p.col(b).array() - mx).exp().matrix();
      p.col(b) /= p.col(b).sum();
    }
    return p;
  }

  PolicyBatchEval evaluate(const Matrix& states, const Matrix& actions) const {
    if (actions.rows() != 1 || actions.cols() != states.cols()) {
      throw ShapeError("categorical head expects one action index per sample");
    }
    PolicyBatchEval e;
    e.cache = logit_net.forward_batch(states);
    const Matrix& logits = e.cache.output();
    e.aux = softmax(logits);
    e.log_probs.resize(states.cols());
    e.entropies.resize(states.cols());
    for (Eigen::Index b = 0; b < states.cols(); ++b) {
      const auto a = index_of(actions(0, b));
      const double mx = logits.col(b).maxCoeff();
      const double lse = mx + std::log((logits.col(b).array() - mx).exp().sum());
      e.log_probs[b] = logits(a, b) - lse;
      double h = 0.0;
      for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        const double lp = logits(j, b) - lse;
        h -= e.aux(j, b) * lp;
      }
      e.entropies[b] = h;
    }
    return e;
  }

  PolicyGradients backward(const PolicyBatchEval& e, const Matrix& actions, const Vector& dlogp,
                           const Vector& dentropy) const {
    const Matrix& logits = e.cache.output();
    Matrix dlogits(logits.rows(), logits.cols());
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
      const auto a = index_of(actions(0, b));
      const double mx = logits.col(b).maxCoeff();
      const double lse = mx + std::log((logits.col(b).array() - mx).exp().sum());
      for (Eigen::Index j = 0; j < logits.rows(); ++j) {
        const double p = e.aux(j, b);
        const double onehot = j == a ? 1.0 : 0.0;
        const double lp = logits(j, b) - lse;
        dlogits(j, b) = dlogp[b] * (onehot - p) - dentropy[b] * p * (lp + e.entropies[b]);
      }
    }
    PolicyGradients g;
    g.net = logit_net.backward(e.cache, dlogits);
    return g;
  }

  std::vector<std::span<double>> parameter_blocks() { return logit_net.parameter_blocks(); }

  template <class Rng>
  Action sample(const Vector& state, Rng& rng) const {
    const Matrix p = softmax(logit_net.forward_batch(state).output());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    Eigen::Index choice = p.rows() - 1;
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      acc += p(j, 0);
      if (x < acc) {
        choice = j;
        break;
      }
    }
    return Action{static_cast<double>(choice)};
  }

  Action mode(const Vector& state) const {
    const Vector logits = logit_net.forward(state);
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return Action{static_cast<double>(best)};
  }

  Matrix action_matrix(std::span<const Action> actions) const {
    Matrix m(1, static_cast<Eigen::Index>(actions.size()));
    for (std::size_t b = 0; b < actions.size(); ++b) {
      if (actions[b].size() != 1) throw ShapeError("categorical action must hold exactly one index");
      m(0, static_cast<Eigen::Index>(b)) = actions[b][0];
    }
    return m;
  }

  friend bool operator==(const CategoricalPolicyHead&, const CategoricalPolicyHead&) = default;

 private:
  Eigen::Index index_of(double a) const {
    const double r = std::round(a);
    if (r != a || r < 0.0 || r >= static_cast<double>(action_count())) {
      throw ShapeError("categorical action index " + std::to_string(a) + " outside [0, " +
                       std::to_string(action_count()) + ")");
    }
    return static_cast<Eigen::Index>(r);
  }
};

using PolicyHead = std::variant<GaussianPolicyHead, CategoricalPolicyHead>;

inline std::size_t state_dim(const PolicyHead& head) {
  return std::visit([](const auto& h) { return h.state_dim(); }, head);
}

inline Mlp& policy_network(PolicyHead& head) {
  if (auto* g = std::get_if<GaussianPolicyHead>(&head)) return g->mean_net;
  return std::get<CategoricalPolicyHead>(head).logit_net;
}

inline const Mlp& policy_network(const PolicyHead& head) {
  if (const auto* g = std::get_if<GaussianPolicyHead>(&head)) return g->mean_net;
  return std::get<CategoricalPolicyHead>(head).logit_net;
}

inline Matrix action_matrix(const PolicyHead& head, std::span<const Action> actions) {
  return std::visit([&](const auto& h) { return h.action_matrix(actions); }, head);
}

inline PolicyBatchEval evaluate_batch(const PolicyHead& head, const Matrix& states, const Matrix& actions) {
  return std::visit([&](const auto& h) { return h.evaluate(states, actions); }, head);
}

inline PolicyGradients policy_backward(const PolicyHead& head, const PolicyBatchEval& e,
                                       const Matrix& actions, const Vector& dlogp,
                                       const Vector& dentropy) {
  if (const auto* g = std::get_if<GaussianPolicyHead>(&head)) return g->backward(e, dlogp, dentropy);
  return std::get<CategoricalPolicyHead>(head).backward(e, actions, dlogp, dentropy);
}

inline std::vector<std::span<double>> parameter_blocks(PolicyHead& head) {
  return std::visit([](auto& h) { return h.parameter_blocks(); }, head);
}

/// Log-probability of `action` in `state` and the distribution's entropy there.
inline LogProbEntropy log_prob_and_entropy(const PolicyHead& head, const Vector& state, const Action& action) {
  const Matrix a = action_matrix(head, std::span<const Action>(&action, 1));
  const PolicyBatchEval e = evaluate_batch(head, state, a);
  return {e.log_probs[0], e.entropies[0]};
}

/// Mean entropy over a batch of states (actions do not enter the entropy).
inline double mean_entropy(const PolicyHead& head, const Matrix& states) {
  if (states.cols() == 0) return 0.0;
  const Eigen::Index rows =
      std::holds_alternative<GaussianPolicyHead>(head)
          ? static_cast<Eigen::Index>(std::get<GaussianPolicyHead>(head).action_dim())
          : 1;
  const PolicyBatchEval e = evaluate_batch(head, states, Matrix::Zero(rows, states.cols()));
  return e.entropies.mean();
}

template <class Rng>
Action sample_action(const PolicyHead& head, const Vector& state, Rng& rng) {
  return std::visit([&](const auto& h) { return h.sample(state, rng); }, head);
}

inline Action mode_action(const PolicyHead& head, const Vector& state) {
  return std::visit([&](const auto& h) { return h.mode(state); }, head);
}

}  // namespace hca_marl
