#pragma once

// Dense feedforward networks with exact analytic gradients.
//
// Inputs are laid out column-per-sample: a batch of B observations of
// dimension d is a d x B matrix. Single-sample calls go through the same
// batched path with B = 1.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hca_marl/error.hpp"

namespace hca_marl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { tanh, relu, identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

inline Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("", "unknown activation '" + std::string(name) + "'");
}

/// Parameter gradients of an Mlp plus the gradient with respect to its input.
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;

  /// Spans over each parameter gradient, in declaration order (W_0, b_0, W_1, b_1, ...).
  std::vector<std::span<const double>> blocks() const {
    std::vector<std::span<const double>> out;
    out.reserve(weights.size() * 2);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
      out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
    }
    return out;
  }

  MlpGradients& operator+=(const MlpGradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }
};

/// Activations kept from a forward pass; `layers[0]` is the input batch.
struct ForwardCache {
  std::vector<Matrix> layers;

  const Matrix& output() const { return layers.back(); }
};

class Mlp {
 public:
  Mlp() = default;

  /// Randomly initialised network. Hidden layers use Glorot-uniform bounds;
  /// the output layer is additionally multiplied by `output_scale`. Biases start at zero.
  template <class Rng>
  Mlp(std::vector<std::size_t> layer_sizes, Activation activation, Rng& rng,
      double output_scale = 1.0)
      : Mlp(std::move(layer_sizes), activation) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double fan_in = static_cast<double>(weights_[l].cols());
      const double fan_out = static_cast<double>(weights_[l].rows());
      double bound = std::sqrt(6.0 / (fan_in + fan_out));
      if (activation_ == Activation::relu && l + 1 < weights_.size()) {
        bound = std::sqrt(6.0 / fan_in);
      }
      if (l + 1 == weights_.size()) bound *= output_scale;
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < weights_[l].size(); ++i) {
        weights_[l].data()[i] = dist(rng);
      }
    }
  }

  /// All-zero network with the given shape.
  Mlp(std::vector<std::size_t> layer_sizes, Activation activation)
      : layer_sizes_(std::move(layer_sizes)), activation_(activation) {
    if (layer_sizes_.size() < 2) {
      throw ShapeError("Mlp needs at least an input and an output size");
    }
    for (std::size_t s : layer_sizes_) {
      if (s == 0) throw ShapeError("Mlp layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(layer_sizes_[l]);
      const auto out = static_cast<Eigen::Index>(layer_sizes_[l + 1]);
      weights_.push_back(Matrix::Zero(out, in));
      biases_.push_back(Vector::Zero(out));
    }
  }

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t output_dim() const { return layer_sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  Activation activation() const { return activation_; }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    }
    return n;
  }

  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> out;
    out.reserve(weights_.size() * 2);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.emplace_back(weights_[l].data(), static_cast<std::size_t>(weights_[l].size()));
      out.emplace_back(biases_[l].data(), static_cast<std::size_t>(biases_[l].size()));
    }
    return out;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    }
    return true;
  }

  MlpGradients zero_gradients(Eigen::Index batch = 1) const {
    MlpGradients g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
      g.biases.push_back(Vector::Zero(biases_[l].size()));
    }
    g.input = Matrix::Zero(static_cast<Eigen::Index>(input_dim()), batch);
    return g;
  }

  /// Batched forward pass. `inputs` is input_dim x B.
  ForwardCache forward_batch(const Matrix& inputs) const {
    if (inputs.rows() != static_cast<Eigen::Index>(input_dim())) {
      throw ShapeError("Mlp input has " + std::to_string(inputs.rows()) + " rows, expected " +
                       std::to_string(input_dim()));
    }
    ForwardCache cache;
    cache.layers.reserve(weights_.size() + 1);
    cache.layers.push_back(inputs);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * cache.layers.back();
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) activate(z);
      cache.layers.push_back(std::move(z));
    }
    return cache;
  }

  Vector forward(const Vector& input) const {
    if (input.size() != static_cast<Eigen::Index>(input_dim())) {
      throw ShapeError("Mlp input has length " + std::to_string(input.size()) + ", expected " +
                       std::to_string(input_dim()));
    }
    return forward_batch(input).output().col(0);
  }

  /// Backpropagates `output_grad` (output_dim x B) through the pass recorded
  /// in `cache`. Parameter gradients are summed over the batch columns.
  MlpGradients backward(const ForwardCache& cache, const Matrix& output_grad) const {
    if (cache.layers.size() != weights_.size() + 1) {
      throw ShapeError("forward cache does not belong to this network");
    }
    const Eigen::Index batch = cache.layers.front().cols();
    if (output_grad.rows() != static_cast<Eigen::Index>(output_dim()) ||
        output_grad.cols() != batch) {
      throw ShapeError("output gradient shape does not match the forward pass");
    }
    MlpGradients g;
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    Matrix delta = output_grad;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Matrix& prev = cache.layers[l];
      g.weights[l].noalias() = delta * prev.transpose();
      g.biases[l] = delta.rowwise().sum();
      Matrix back = weights_[l].transpose() * delta;
      if (l > 0) {
        apply_activation_derivative(prev, back);
      }
      delta = std::move(back);
    }
    g.input = std::move(delta);
    return g;
  }

  MlpGradients backward(const Vector& input, const Vector& output_grad) const {
    return backward(forward_batch(input), output_grad);
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layer_sizes_ != b.layer_sizes_ || a.activation_ != b.activation_) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l) {
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    }
    return true;
  }

 private:
  void activate(Matrix& z) const {
    switch (activation_) {
      case Activation::tanh: z = z.array().tanh().matrix(); break;
      case Activation::relu: z = z.cwiseMax(0.0); break;
      case Activation::identity: break;
    }
  }

  // `activated` holds act(z); both derivatives are expressible through it.
  void apply_activation_derivative(const Matrix& activated, Matrix& grad) const {
    switch (activation_) {
      case Activation::tanh:
        grad.array() *= (1.0 - activated.array().square());
        break;
      case Activation::relu:
        grad.array() *= (activated.array() > 0.0).cast<double>();
        break;
      case Activation::identity: break;
    }
  }

  std::vector<std::size_t> layer_sizes_;
  Activation activation_ = Activation::tanh;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

}  // namespace hca_marl
