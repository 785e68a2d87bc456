#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "blowup_pinn/optimizer.hpp"
#include "test_support.hpp"

namespace bp = blowup_pinn;

namespace {

bp::NetworkParams tiny_net() { return bp::testing::random_net(bp::mlp_layer_sizes(2, 1, 3, 2), 7); }

bp::Vector constant_vector(const bp::NetworkParams& p, double g) {
  return bp::Vector::Constant(static_cast<Eigen::Index>(p.parameter_count()), g);
}

bp::CollocationSet small_set(const bp::Burgers1D& prob, std::uint64_t seed = 0) {
  return bp::sample_collocation(prob, {256, 64, 64}, bp::Scheme::random, seed);
}

}  // namespace

TEST(Adam, ZeroGradientFromFreshStateLeavesParametersUnchanged) {
  auto p = tiny_net();
  const auto before = p;
  auto s = bp::AdamState::fresh(p.parameter_count(), 1e-3);
  bp::adam_step(s, p, constant_vector(p, 0.0));
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, SingleStepMatchesHandComputation) {
  // m = (1-b1) g, v = (1-b2) g^2; bias correction gives m_hat = g, v_hat = g^2.
  auto p = tiny_net();
  const bp::Vector theta0 = p.flat();
  auto s = bp::AdamState::fresh(p.parameter_count(), 1e-3);
  bp::Vector g = constant_vector(p, 0.0);
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = 0.1 * static_cast<double>(i + 1) * (i % 2 ? -1.0 : 1.0);
  bp::adam_step(s, p, g);
  const bp::Vector delta = p.flat() - theta0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double expected = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(delta[i], expected, 1e-15) << i;
    EXPECT_NEAR(s.m[i], 0.1 * g[i], 1e-15 * std::abs(g[i]));
    EXPECT_NEAR(s.v[i], 0.001 * g[i] * g[i], 1e-14 * s.v[i]);
  }
}

TEST(Adam, ConstantGradientMatchesScalarRecurrence) {
  auto p = tiny_net();
  const double lr = 1e-2;
  auto s = bp::AdamState::fresh(p.parameter_count(), lr);
  const double g = 0.37;
  const bp::Vector grad = constant_vector(p, g);

  // Independent scalar transcription of the recurrence.
  double m = 0.0, v = 0.0, x = p.flat()[0];
  double last_update = 0.0;
  for (int t = 1; t <= 500; ++t) {
    const double x_before = p.flat()[0];
    bp::adam_step(s, p, grad);
    last_update = p.flat()[0] - x_before;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(p.flat()[0], x, 1e-12);
  // Sign-like limit: the per-step magnitude approaches lr.
  EXPECT_NEAR(std::abs(last_update), lr, 1e-6 * lr + 1e-12);
  EXPECT_TRUE((s.v.array() >= 0.0).all());
}

TEST(Adam, NonFiniteGradientThrowsAndLeavesStateUnchanged) {
  auto p = tiny_net();
  auto s = bp::AdamState::fresh(p.parameter_count(), 1e-3);
  bp::adam_step(s, p, constant_vector(p, 0.2));
  const auto p_before = p;
  const auto s_before = s;
  bp::Vector g = constant_vector(p, 0.1);
  g[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(bp::adam_step(s, p, g), std::invalid_argument);
  EXPECT_EQ(p, p_before);
  EXPECT_EQ(s.step, s_before.step);
  EXPECT_EQ(s.m, s_before.m);
  EXPECT_EQ(s.v, s_before.v);
  g[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(bp::adam_step(s, p, g), std::invalid_argument);
}

TEST(Adam, LengthMismatchThrows) {
  auto p = tiny_net();
  auto s = bp::AdamState::fresh(p.parameter_count(), 1e-3);
  EXPECT_THROW(bp::adam_step(s, p, bp::Vector::Zero(3)), std::invalid_argument);
}

TEST(Train, ZeroIterationsReturnsInitialParameters) {
  const bp::Burgers1D prob(0.5);
  const auto set = small_set(prob);
  bp::TrainConfig cfg;
  cfg.width = 8;
  cfg.depth = 3;
  cfg.iterations = 0;
  const auto res = bp::train(prob, set, cfg);
  const auto init = bp::NetworkParams::glorot(bp::network_shape<bp::Burgers1D>(cfg), cfg.seed);
  EXPECT_EQ(res.best.params, init);
  EXPECT_EQ(res.best.iteration, 0);
  EXPECT_EQ(res.best.loss, bp::empirical_loss(prob, bp::NetworkSurrogate(init), set));
  EXPECT_EQ(res.best.loss, res.initial_loss);
  ASSERT_EQ(res.history.size(), 1u);
}

TEST(Train, TenThousandIterationsReduceTheLoss) {
  const bp::Burgers1D prob(0.5);
  const auto set = small_set(prob);
  bp::TrainConfig cfg;
  cfg.width = 30;
  cfg.depth = 6;
  cfg.iterations = 10000;
  cfg.seed = 0;
  const auto res = bp::train(prob, set, cfg);
  ASSERT_FALSE(res.diverged) << res.failure;
  EXPECT_LT(res.final_loss, res.initial_loss);
  EXPECT_LT(res.best.loss, 0.1 * res.initial_loss);
  EXPECT_TRUE(res.best.params.all_finite());
  EXPECT_GT(res.train_seconds, 0.0);
}

TEST(Train, IdenticalSeedsGiveBitwiseIdenticalRuns) {
  const bp::Burgers1D prob(0.3);
  bp::TrainConfig cfg;
  cfg.width = 10;
  cfg.depth = 3;
  cfg.iterations = 300;
  cfg.seed = 42;
  const auto a = bp::train(prob, small_set(prob, 42), cfg);
  const auto b = bp::train(prob, small_set(prob, 42), cfg);
  EXPECT_EQ(a.best.params, b.best.params);
  EXPECT_EQ(a.best.loss, b.best.loss);
  EXPECT_EQ(a.best.iteration, b.best.iteration);
  EXPECT_EQ(a.final_params, b.final_params);
  cfg.seed = 43;
  const auto c = bp::train(prob, small_set(prob, 42), cfg);
  EXPECT_NE(a.best.loss, c.best.loss);
}

TEST(Train, BestIsBelowEveryRecordedLossAndHistoryIsStrided) {
  const bp::Burgers1D prob(0.5);
  bp::TrainConfig cfg;
  cfg.width = 6;
  cfg.depth = 3;
  cfg.iterations = 1550;
  cfg.lr = 1e-2;
  const auto res = bp::train(prob, small_set(prob), cfg);
  // 0..1000 dense, then 1100..1500, then the final iterate.
  ASSERT_EQ(res.history.size(), 1001u + 5u + 1u);
  EXPECT_EQ(res.history[1000].iteration, 1000);
  EXPECT_EQ(res.history[1001].iteration, 1100);
  EXPECT_EQ(res.history.back().iteration, 1550);
  EXPECT_EQ(res.history.back().loss, res.final_loss);
  for (const auto& h : res.history) EXPECT_LE(res.best.loss, h.loss);
  EXPECT_EQ(res.best.loss, bp::empirical_loss(prob, bp::NetworkSurrogate(res.best.params), small_set(prob)));
}

TEST(Train, NonFiniteInitialParametersAbortWithPartialHistory) {
  const bp::Burgers1D prob(0.5);
  bp::TrainConfig cfg;
  cfg.width = 4;
  cfg.depth = 2;
  cfg.iterations = 10;
  auto init = bp::NetworkParams::glorot(bp::network_shape<bp::Burgers1D>(cfg), 0);
  init.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto res = bp::train_from(prob, small_set(prob), cfg, init);
  EXPECT_TRUE(res.diverged);
  EXPECT_TRUE(res.history.empty());
  EXPECT_TRUE(std::isnan(res.final_loss));
  EXPECT_NE(res.failure.find("non-finite"), std::string::npos);
}

TEST(Train, RejectsBadConfig) {
  const bp::Burgers1D prob(0.5);
  bp::TrainConfig cfg;
  cfg.iterations = -1;
  EXPECT_THROW(bp::train(prob, small_set(prob), cfg), std::invalid_argument);
  cfg.iterations = 1;
  cfg.lr = 0.0;
  EXPECT_THROW(bp::train(prob, small_set(prob), cfg), std::invalid_argument);
}
