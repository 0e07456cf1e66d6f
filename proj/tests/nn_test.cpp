#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hca_marl/nn.hpp"

using namespace hca_marl;

namespace {

// sum(c .* forward(x)) differentiated numerically.
double weighted_output(const Mlp& net, const Matrix& x, const Matrix& c) {
  return (net.forward_batch(x).output().array() * c.array()).sum();
}

}  // namespace

TEST(Mlp, ZeroNetworkShapes) {
  Mlp net({3, 4, 2}, Activation::tanh);
  EXPECT_EQ(net.input_dim(), 3u);
  EXPECT_EQ(net.output_dim(), 2u);
  EXPECT_EQ(net.layer_count(), 2u);
  EXPECT_EQ(net.parameter_count(), 3u * 4 + 4 + 4 * 2 + 2);
  EXPECT_TRUE(net.forward(Vector::Ones(3)).isZero());
}

TEST(Mlp, RejectsBadShapes) {
  EXPECT_THROW(Mlp({3}, Activation::tanh), ShapeError);
  EXPECT_THROW(Mlp({3, 0, 1}, Activation::tanh), ShapeError);
  Mlp net({3, 2}, Activation::identity);
  EXPECT_THROW(net.forward(Vector::Ones(4)), ShapeError);
  EXPECT_THROW(net.backward(net.forward_batch(Matrix::Ones(3, 2)), Matrix::Ones(2, 3)), ShapeError);
}

TEST(Mlp, HandComputedForward) {
  Mlp net({2, 2, 1}, Activation::tanh);
  net.weights()[0] << 1.0, -1.0, 0.5, 2.0;
  net.biases()[0] << 0.1, -0.2;
  net.weights()[1] << 3.0, -1.0;
  net.biases()[1] << 0.25;
  Vector x(2);
  x << 0.3, -0.4;
  const double h0 = std::tanh(0.3 + 0.4 + 0.1);
  const double h1 = std::tanh(0.15 - 0.8 - 0.2);
  EXPECT_NEAR(net.forward(x)[0], 3.0 * h0 - h1 + 0.25, 1e-15);
}

TEST(Mlp, ReluClipsNegativePreActivations) {
  Mlp net({1, 2, 1}, Activation::relu);
  net.weights()[0] << 1.0, -1.0;
  net.weights()[1] << 1.0, 1.0;
  Vector x(1);
  x << 2.0;
  EXPECT_DOUBLE_EQ(net.forward(x)[0], 2.0);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (Activation act : {Activation::tanh, Activation::relu, Activation::identity}) {
    Mlp net({4, 6, 5, 3}, act, rng);
    Matrix x = Matrix::Random(4, 5);
    Matrix c = Matrix::Random(3, 5);
    const MlpGradients g = net.backward(net.forward_batch(x), c);
    const double h = 1e-6;
    auto blocks = net.parameter_blocks();
    auto gb = g.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t k = 0; k < blocks[b].size(); ++k) {
        const double saved = blocks[b][k];
        blocks[b][k] = saved + h;
        const double up = weighted_output(net, x, c);
        blocks[b][k] = saved - h;
        const double down = weighted_output(net, x, c);
        blocks[b][k] = saved;
        EXPECT_NEAR(gb[b][k], (up - down) / (2 * h), 1e-6) << to_string(act) << " block " << b;
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      EXPECT_NEAR(g.input.data()[i], (weighted_output(net, xp, c) - weighted_output(net, xm, c)) / (2 * h), 1e-6);
    }
  }
}

TEST(Mlp, BatchGradientIsSumOfSampleGradients) {
  std::mt19937_64 rng(3);
  Mlp net({3, 4, 2}, Activation::tanh, rng);
  Matrix x = Matrix::Random(3, 4);
  Matrix c = Matrix::Random(2, 4);
  const MlpGradients whole = net.backward(net.forward_batch(x), c);
  MlpGradients sum = net.zero_gradients();
  for (Eigen::Index b = 0; b < 4; ++b) sum += net.backward(Vector(x.col(b)), Vector(c.col(b)));
  for (std::size_t l = 0; l < whole.weights.size(); ++l) {
    EXPECT_TRUE(whole.weights[l].isApprox(sum.weights[l], 1e-12));
    EXPECT_TRUE(whole.biases[l].isApprox(sum.biases[l], 1e-12));
  }
}

TEST(Mlp, OutputScaleShrinksLastLayer) {
  std::mt19937_64 a(5), b(5);
  Mlp full({8, 16, 4}, Activation::tanh, a, 1.0);
  Mlp small({8, 16, 4}, Activation::tanh, b, 0.01);
  EXPECT_EQ(full.weights()[0], small.weights()[0]);
  EXPECT_NEAR(small.weights()[1].cwiseAbs().maxCoeff(), 0.01 * full.weights()[1].cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mlp, SameSeedSameParameters) {
  std::mt19937_64 a(11), b(11);
  EXPECT_EQ(Mlp({5, 7, 2}, Activation::relu, a), Mlp({5, 7, 2}, Activation::relu, b));
}

TEST(Activation, NamesRoundTrip) {
  for (Activation a : {Activation::tanh, Activation::relu, Activation::identity}) {
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  }
  EXPECT_ANY_THROW(activation_from_string("sigmoid"));
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  Mlp net({3, 3}, Activation::identity);
  net.weights()[0] = Matrix::Identity(3, 3);
  Vector x(3);
  x << 0.5, -2.0, 7.0;
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, ForwardMatchesHandRolledMatrixProducts) {
  std::mt19937_64 rng(2024);
  Mlp net({3, 4, 2}, Activation::tanh, rng);
  Vector x(3);
  x << 0.2, -0.7, 1.1;
  const auto& W = net.weights();
  const auto& b = net.biases();
  double hidden[4];
  for (int i = 0; i < 4; ++i) {
    double z = b[0][i];
    for (int j = 0; j < 3; ++j) z += W[0](i, j) * x[j];
    hidden[i] = std::tanh(z);
  }
  const Vector y = net.forward(x);
  for (int i = 0; i < 2; ++i) {
    double z = b[1][i];
    for (int j = 0; j < 4; ++j) z += W[1](i, j) * hidden[j];
    EXPECT_NEAR(y[i], z, 1e-12);
  }
}

TEST(Mlp, ZeroOutputGradientGivesZeroGradients) {
  std::mt19937_64 rng(4);
  Mlp net({3, 5, 2}, Activation::tanh, rng);
  const MlpGradients g = net.backward(Vector(Vector::Random(3)), Vector(Vector::Zero(2)));
  for (const auto& block : g.blocks()) {
    for (double v : block) EXPECT_EQ(v, 0.0);
  }
}

TEST(Mlp, LinearLayerWeightGradientIsOuterProduct) {
  std::mt19937_64 rng(6);
  Mlp net({3, 2}, Activation::identity, rng);
  Vector x(3), c(2);
  x << 1.0, -2.0, 0.5;
  c << 0.3, -0.9;
  const MlpGradients g = net.backward(x, c);
  EXPECT_TRUE(g.weights[0].isApprox(c * x.transpose(), 1e-15));
  EXPECT_EQ(g.biases[0], c);
}
