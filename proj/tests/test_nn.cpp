#include <gtest/gtest.h>

#include <random>

#include "grad_check.hpp"
#include "pipeforge/errors.hpp"
#include "pipeforge/nn.hpp"

using namespace pipeforge;
using testing_oracle::max_relative_error;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

MlpParams random_net(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(1, 7);
  std::uniform_int_distribution<int> depth(1, 3);
  std::vector<int> dims{width(rng)};
  const int hidden = depth(rng);
  for (int i = 0; i < hidden; ++i) dims.push_back(width(rng));
  dims.push_back(width(rng));
  MlpParams net = make_mlp(dims, rng);
  // Nonzero biases so every parameter is exercised.
  for (auto& l : net.layers) l.bias = random_matrix(l.bias.size(), 1, rng) * 0.3;
  return net;
}

}  // namespace

TEST(Mlp, ShapesAndGlorotRange) {
  std::mt19937_64 rng(1);
  const MlpParams net = make_mlp({8, 256, 3}, rng, 0.01);
  ASSERT_EQ(net.layers.size(), 2u);
  EXPECT_EQ(net.input_dim(), 8);
  EXPECT_EQ(net.output_dim(), 3);
  EXPECT_EQ(net.parameter_count(), 8 * 256 + 256 + 256 * 3 + 3);
  EXPECT_EQ(net.layers[0].activation, Activation::kTanh);
  EXPECT_EQ(net.layers[1].activation, Activation::kIdentity);
  const double limit = std::sqrt(6.0 / (8 + 256));
  EXPECT_LE(net.layers[0].weight.cwiseAbs().maxCoeff(), limit);
  EXPECT_LE(net.layers[1].weight.cwiseAbs().maxCoeff(), 0.01 * std::sqrt(6.0 / (256 + 3)));
  EXPECT_EQ(net.layers[0].bias.norm(), 0.0);
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(2);
  MlpParams net = make_mlp({4, 5, 2}, rng);
  for (auto& l : net.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  EXPECT_EQ(mlp_forward(net, Eigen::VectorXd::Random(4)).norm(), 0.0);
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  MlpParams net;
  net.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::kIdentity});
  const Eigen::VectorXd x = Eigen::Vector3d(0.5, -2.0, 7.0);
  EXPECT_EQ(mlp_forward(net, x), x);
}

TEST(Mlp, ForwardIsDeterministicAndBatchMatchesSingle) {
  std::mt19937_64 rng(3);
  const MlpParams net = make_mlp({5, 6, 6, 2}, rng);
  const Eigen::MatrixXd xs = random_matrix(5, 4, rng);
  const Eigen::MatrixXd batch = mlp_forward_batch(net, xs);
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(mlp_forward(net, xs.col(c)), mlp_forward(net, xs.col(c)));
    EXPECT_LT((mlp_forward(net, xs.col(c)) - batch.col(c)).norm(), 1e-14);
  }
}

TEST(Mlp, ShapeErrors) {
  std::mt19937_64 rng(4);
  MlpParams net = make_mlp({3, 4, 2}, rng);
  EXPECT_THROW(mlp_forward(net, Eigen::VectorXd::Zero(5)), InvalidArgument);
  EXPECT_THROW(mlp_backward(net, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)),
               InvalidArgument);
  net.layers[1].weight.resize(2, 5);
  EXPECT_THROW(validate_mlp(net), InvalidArgument);
  net = make_mlp({3, 4, 2}, rng);
  net.layers[0].bias(0) = std::nan("");
  EXPECT_THROW(validate_mlp(net), InvalidArgument);
}

TEST(Mlp, FlattenAssignRoundTrip) {
  std::mt19937_64 rng(5);
  MlpParams net = make_mlp({3, 4, 2}, rng);
  const Eigen::VectorXd flat = flatten_params(net);
  EXPECT_EQ(flat.size(), net.parameter_count());
  EXPECT_EQ(flat(0), net.layers[0].weight(0, 0));
  EXPECT_EQ(flat(1), net.layers[0].weight(1, 0));  // column-major
  MlpParams other = make_mlp({3, 4, 2}, rng);
  assign_params(other, flat);
  EXPECT_EQ(other, net);
  EXPECT_THROW(assign_params(other, Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(Mlp, BackwardMatchesCentralDifferencesOver100Configs) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const MlpParams net = random_net(rng);
    const int batch = 1 + trial % 3;
    const Eigen::MatrixXd x = random_matrix(net.input_dim(), batch, rng);
    const Eigen::MatrixXd w = random_matrix(net.output_dim(), batch, rng);
    // Scalar probe: sum of w ⊙ output.
    MlpTape tape;
    mlp_forward_batch(net, x, &tape);
    const MlpGrads g = mlp_backward(net, tape, w);

    auto loss_params = [&](const Eigen::VectorXd& flat) {
      MlpParams probe = net;
      assign_params(probe, flat);
      return (mlp_forward_batch(probe, x).array() * w.array()).sum();
    };
    worst = std::max(worst, max_relative_error(loss_params, flatten_params(net), flatten_grads(g)));

    auto loss_input = [&](const Eigen::VectorXd& flat_x) {
      const Eigen::MatrixXd xi = flat_x.reshaped(x.rows(), x.cols());
      return (mlp_forward_batch(net, xi).array() * w.array()).sum();
    };
    const Eigen::VectorXd gx = g.input.reshaped();
    worst = std::max(worst, max_relative_error(loss_input, x.reshaped(), gx));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, BackwardIsLinearInOutputGrad) {
  std::mt19937_64 rng(7);
  const MlpParams net = make_mlp({4, 6, 3}, rng);
  const Eigen::VectorXd x = random_matrix(4, 1, rng);
  const Eigen::VectorXd a = random_matrix(3, 1, rng);
  const Eigen::VectorXd b = random_matrix(3, 1, rng);
  const Eigen::VectorXd ga = flatten_grads(mlp_backward(net, x, a));
  const Eigen::VectorXd gb = flatten_grads(mlp_backward(net, x, b));
  const Eigen::VectorXd gab = flatten_grads(mlp_backward(net, x, 2.0 * a - 3.0 * b));
  EXPECT_LT((gab - (2.0 * ga - 3.0 * gb)).norm(), 1e-12);
  EXPECT_EQ(flatten_grads(mlp_backward(net, x, Eigen::VectorXd::Zero(3))).norm(), 0.0);
}

TEST(Adam, FirstStepMovesEachCoordinateByLr) {
  Adam opt(3);
  Eigen::VectorXd p = Eigen::Vector3d(1.0, 2.0, 3.0);
  opt.step(p, Eigen::Vector3d(0.5, -4.0, 0.0), 0.1);
  EXPECT_NEAR(p(0), 0.9, 1e-7);
  EXPECT_NEAR(p(1), 2.1, 1e-7);
  EXPECT_EQ(p(2), 3.0);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ZeroLearningRateLeavesParamsUntouched) {
  Adam opt(2);
  Eigen::VectorXd p = Eigen::Vector2d(1.0, -1.0);
  const Eigen::VectorXd before = p;
  opt.step(p, Eigen::Vector2d(3.0, 1.0), 0.0);
  EXPECT_EQ(p, before);
}

TEST(Adam, MinimizesQuadratic) {
  Adam opt(2);
  Eigen::VectorXd p = Eigen::Vector2d(3.0, -2.0);
  for (int i = 0; i < 3000; ++i) opt.step(p, 2.0 * (p - Eigen::Vector2d(0.5, 0.25)), 0.01);
  EXPECT_LT((p - Eigen::Vector2d(0.5, 0.25)).norm(), 1e-3);
}
