#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rebama/checkpoint.hpp"
#include "rebama/error.hpp"
#include "rebama/neural.hpp"

namespace rebama {
namespace {

// Plain loops over the documented flat parameter layout.
std::vector<double> reference_forward(const Mlp& net, const std::vector<double>& x,
                                      const std::vector<double>& mask = {}) {
  const int in = net.input_size(), h = net.hidden_size(), out = net.output_size();
  const double* p = net.parameters().data();
  const double* w1 = p;
  const double* b1 = w1 + h * in;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * h;
  const double* w3 = b2 + h;
  const double* b3 = w3 + out * h;

  std::vector<double> h1(h), h2(h), z(out);
  for (int r = 0; r < h; ++r) {
    double s = b1[r];
    for (int c = 0; c < in; ++c) s += w1[c * h + r] * x[c];
    h1[r] = std::tanh(s);
  }
  for (int r = 0; r < h; ++r) {
    double s = b2[r];
    for (int c = 0; c < h; ++c) s += w2[c * h + r] * h1[c];
    h2[r] = s > 0 ? s : 0.0;
  }
  for (int r = 0; r < out; ++r) {
    double s = b3[r];
    for (int c = 0; c < h; ++c) s += w3[c * out + r] * h2[c];
    z[r] = s;
  }
  const Head& head = net.head();
  if (head.kind == HeadKind::softmax_blocks) {
    const int size = out / head.blocks;
    for (int b = 0; b < head.blocks; ++b) {
      double mx = -1e300;
      for (int k = b * size; k < (b + 1) * size; ++k) {
        if (mask.empty() || mask[k] != 0) mx = std::max(mx, z[k]);
      }
      double sum = 0.0;
      for (int k = b * size; k < (b + 1) * size; ++k) {
        z[k] = (mask.empty() || mask[k] != 0) ? std::exp(z[k] - mx) : 0.0;
        sum += z[k];
      }
      for (int k = b * size; k < (b + 1) * size; ++k) z[k] /= sum;
    }
  } else if (head.kind == HeadKind::bounded_affine) {
    for (int k = 0; k < out; ++k) {
      z[k] = head.lower[k] + (head.upper[k] - head.lower[k]) / (1.0 + std::exp(-z[k]));
    }
  }
  return z;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double spread = 1.5) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::MatrixXd m(rows, cols);
  for (auto& x : m.reshaped()) x = u(rng);
  return m;
}

TEST(Mlp, ParameterCount) {
  EXPECT_EQ(Mlp::parameter_count(34, 30, 10), 34 * 30 + 30 + 30 * 30 + 30 + 30 * 10 + 10);
  EXPECT_EQ(Mlp(34, 10, Head::softmax(2)).parameter_count(), Mlp::parameter_count(34, 30, 10));
}

TEST(Mlp, ZeroParametersGiveSymmetricOutputs) {
  Mlp soft(4, 3, Head::softmax(1));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
  const Eigen::MatrixXd y = soft.forward(x);
  EXPECT_TRUE(y.isApproxToConstant(1.0 / 3.0, 1e-15));
  Mlp lin(4, 1, Head::linear());
  EXPECT_EQ(lin.forward(x), Eigen::MatrixXd::Zero(1, 2));
}

TEST(Mlp, MatchesReferenceEvaluator) {
  std::mt19937_64 rng(8);
  Eigen::VectorXd lo(3), hi(3);
  lo << -0.3, -0.2, -0.2;
  hi << 0.3, 0.2, 0.2;
  const std::vector<Mlp> nets{Mlp::initialized(7, 10, Head::softmax(2), 1),
                              Mlp::initialized(7, 3, Head::bounded(lo, hi), 2),
                              Mlp::initialized(7, 1, Head::linear(), 3)};
  for (const auto& net : nets) {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd x = random_matrix(rng, 7, 3);
      Eigen::MatrixXd mask;
      if (net.head().kind == HeadKind::softmax_blocks && trial % 2 == 1) {
        mask = Eigen::MatrixXd::Ones(10, 3);
        mask(1, 0) = mask(6, 0) = mask(3, 2) = mask(9, 2) = 0.0;
      }
      const Eigen::MatrixXd y = net.forward(x, mask);
      for (int c = 0; c < 3; ++c) {
        std::vector<double> m;
        if (mask.size() > 0) m.assign(mask.col(c).data(), mask.col(c).data() + 10);
        const auto ref = reference_forward(net, {x.col(c).data(), x.col(c).data() + 7}, m);
        for (int r = 0; r < net.output_size(); ++r) EXPECT_NEAR(y(r, c), ref[r], 1e-12);
      }
    }
  }
}

TEST(Mlp, HeadsRespectTheirRanges) {
  std::mt19937_64 rng(12);
  Eigen::VectorXd lo(3), hi(3);
  lo << -0.3, -0.2, -0.2;
  hi << 0.3, 0.2, 0.2;
  const auto soft = Mlp::initialized(5, 8, Head::softmax(2), 4);
  const auto bounded = Mlp::initialized(5, 3, Head::bounded(lo, hi), 5);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(8, 200);
  for (int c = 0; c < 200; c += 3) mask(c % 4, c) = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd x = random_matrix(rng, 5, 200, 3.0);
    const Eigen::MatrixXd y = soft.forward(x, mask);
    for (int c = 0; c < 200; ++c) {
      EXPECT_NEAR(y.col(c).head(4).sum(), 1.0, 1e-9);
      EXPECT_NEAR(y.col(c).tail(4).sum(), 1.0, 1e-9);
      for (int r = 0; r < 8; ++r) {
        if (mask(r, c) == 0.0) EXPECT_EQ(y(r, c), 0.0);
        else EXPECT_GT(y(r, c), 0.0);
      }
    }
    const Eigen::MatrixXd b = bounded.forward(x);
    for (int c = 0; c < 200; ++c) {
      for (int r = 0; r < 3; ++r) {
        EXPECT_GT(b(r, c), lo[r]);
        EXPECT_LT(b(r, c), hi[r]);
      }
    }
  }
}

TEST(Mlp, RejectsBadShapes) {
  const auto net = Mlp::initialized(4, 6, Head::softmax(2), 1);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(3, 1)), ValidationError);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Ones(6, 1)),
               ValidationError);
  Mlp copy = net;
  EXPECT_THROW(copy.set_parameters(Eigen::VectorXd::Zero(3)), ValidationError);
  Mlp::Cache cache;
  net.forward(Eigen::MatrixXd::Zero(4, 2), cache);
  EXPECT_THROW(net.backward(cache, Eigen::MatrixXd::Zero(6, 3)), ValidationError);
}

TEST(Mlp, InitializationIsSeeded) {
  const auto a = Mlp::initialized(6, 4, Head::linear(), 77);
  const auto b = Mlp::initialized(6, 4, Head::linear(), 77);
  const auto c = Mlp::initialized(6, 4, Head::linear(), 78);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  // First layer weights lie within 1/sqrt(fan_in).
  EXPECT_LE(a.parameters().head(6 * 30).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(6.0));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(1);
  const auto net = Mlp::initialized(5, 4, Head::softmax(2), 9);
  Mlp::Cache cache;
  net.forward(random_matrix(rng, 5, 3), cache);
  const auto g = net.backward(cache, Eigen::MatrixXd::Zero(4, 3));
  EXPECT_TRUE(g.parameters.isZero(0.0));
  EXPECT_TRUE(g.input.isZero(0.0));
}

TEST(Backward, MatchesFiniteDifferencesForAllHeads) {
  std::mt19937_64 rng(21);
  Eigen::VectorXd lo(3), hi(3);
  lo << -0.3, -0.2, -0.2;
  hi << 0.3, 0.2, 0.2;
  for (int trial = 0; trial < 10; ++trial) {
    const auto region = Mlp::initialized(8, 6, Head::softmax(2), 100 + trial);
    const auto adversary = Mlp::initialized(8, 3, Head::bounded(lo, hi), 200 + trial);
    const auto critic = Mlp::initialized(8, 1, Head::linear(), 300 + trial);
    const Eigen::MatrixXd x = random_matrix(rng, 8, 2);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(6, 2);
    mask(0, 1) = mask(3, 1) = 0.0;
    for (const auto& [net, m] : {std::pair{&region, mask}, std::pair{&adversary, Eigen::MatrixXd()},
                                 std::pair{&critic, Eigen::MatrixXd()}}) {
      const Eigen::MatrixXd up = random_matrix(rng, net->output_size(), 2);
      const auto check = check_gradients(*net, x, up, m);
      EXPECT_LE(check.max_parameter_error, 1e-4) << to_string(net->head().kind);
      EXPECT_LE(check.max_input_error, 1e-4) << to_string(net->head().kind);
      EXPECT_GT(check.scored, 0);
    }
  }
}

// Single-sample quadratic loss: gradient of ||mu - target||^2 is backward(2 (mu - target)).
TEST(Backward, QuadraticLossGradient) {
  std::mt19937_64 rng(31);
  auto net = Mlp::initialized(4, 6, Head::softmax(2), 5);
  const Eigen::MatrixXd x = random_matrix(rng, 4, 1);
  Eigen::MatrixXd target(6, 1);
  target << 0.7, 0.2, 0.1, 0.0, 0.5, 0.5;
  Mlp::Cache cache;
  const Eigen::MatrixXd y = net.forward(x, cache);
  const Eigen::VectorXd g = net.backward(cache, 2.0 * (y - target)).parameters;
  auto loss = [&](const Mlp& n) { return (n.forward(x) - target).squaredNorm(); };
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < net.parameter_count(); k += 7) {
    Mlp plus = net, minus = net;
    plus.parameters()[k] += h;
    minus.parameters()[k] -= h;
    const double fd = (loss(plus) - loss(minus)) / (2 * h);
    if (std::abs(fd) > 1e-7) EXPECT_LE(std::abs(fd - g[k]) / std::abs(fd), 1e-4) << k;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Eigen::VectorXd theta(1);
  theta << 0.5;
  Eigen::VectorXd g(1);
  g << 0.2;
  auto state = AdamState::for_parameters(1, 0.001);
  adam_step(theta, g, state);
  EXPECT_NEAR(theta[0], 0.499, 1e-9);
  EXPECT_EQ(state.step, 1);
  const double after_one = theta[0];
  adam_step(theta, g, state);
  EXPECT_LT(theta[0], after_one);
}

TEST(Adam, ZeroGradientAndErrors) {
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 0.25);
  auto state = AdamState::for_parameters(3);
  adam_step(theta, Eigen::VectorXd::Zero(3), state);
  EXPECT_EQ(theta, Eigen::VectorXd::Constant(3, 0.25));
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  bad[1] = std::nan("");
  EXPECT_THROW(adam_step(theta, bad, state), NumericError);
  EXPECT_THROW(adam_step(theta, Eigen::VectorXd::Zero(2), state), ValidationError);
}

TEST(SoftUpdate, Blend) {
  Eigen::VectorXd target = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd online = Eigen::VectorXd::Ones(2);
  soft_update(target, online, 0.01);
  EXPECT_EQ(target, Eigen::VectorXd::Constant(2, 0.01));
  soft_update(target, online, 1.0);
  EXPECT_EQ(target, online);
  Eigen::VectorXd same = online;
  soft_update(same, online, 0.3);
  EXPECT_EQ(same, online);
}

TEST(Checkpoint, RoundTripsThroughStream) {
  Eigen::VectorXd lo(3), hi(3);
  lo << -0.3, -0.2, -0.2;
  hi << 0.3, 0.2, 0.2;
  Checkpoint c;
  c.grid_width = 4;
  c.grid_height = 3;
  c.horizon = 48;
  c.observation_scale = 2.5;
  c.episodes = 17;
  c.region_policy = Mlp::initialized(34, 10, Head::softmax(2), 1);
  c.adversary_policy = Mlp::initialized(34, 3, Head::bounded(lo, hi), 2);
  c.critic = Mlp::initialized(50, 1, Head::linear(), 3, 12);
  std::stringstream s;
  write_checkpoint(s, c);
  EXPECT_EQ(read_checkpoint(s), c);

  std::string bytes = s.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), ValidationError);
  bytes[0] = 'X';
  std::stringstream bad_magic(bytes);
  EXPECT_THROW(read_checkpoint(bad_magic), ValidationError);
}

}  // namespace
}  // namespace rebama
