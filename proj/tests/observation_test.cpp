#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "invgame/forward_game.hpp"
#include "invgame/observation.hpp"
#include "invgame/scenarios.hpp"
#include "support.hpp"

namespace invgame {
namespace {

Trajectory demo() {
  const Scenario s = two_player_crossing();
  return zero_input_initialization(s.game);
}

ObservationModel model(ObservationKind kind, double sigma) {
  return make_observation_model(two_player_crossing().game, kind, sigma);
}

TEST(Observe, NoiselessIsExact) {
  const Trajectory t = demo();
  const ObservationSequence full = observe(t, model(ObservationKind::kFull, 0.0), 3);
  EXPECT_EQ(full.y, t.states);
  const ObservationSequence part = observe(t, model(ObservationKind::kPartial, 0.0), 3);
  ASSERT_EQ(part.y.rows(), 6);
  EXPECT_EQ(part.y.topRows(3), t.states.topRows(3));
  EXPECT_EQ(part.y.bottomRows(3), t.states.middleRows(4, 3));
  EXPECT_EQ(neg_log_likelihood(full, t), 0.0);
  EXPECT_EQ(neg_log_likelihood(part, t), 0.0);
}

TEST(Observe, SameSeedSameSequence) {
  const Trajectory t = demo();
  const auto m = model(ObservationKind::kPartial, 0.1);
  EXPECT_EQ(observe(t, m, 42).y, observe(t, m, 42).y);
  EXPECT_NE(observe(t, m, 42).y, observe(t, m, 43).y);
}

TEST(Observe, StepNoiseDependsOnlyOnSeedAndStep) {
  const Trajectory t = demo();
  Trajectory head = t;
  head.states = t.states.leftCols(10);
  const auto m = model(ObservationKind::kFull, 0.1);
  const Matrix a = observe(t, m, 9).y - t.states;
  const Matrix b = observe(head, m, 9).y - head.states;
  EXPECT_LT((a.leftCols(10) - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Observe, NoiseMoments) {
  // 10^4 samples of a fixed state: one step per sample
  Trajectory t;
  t.states = Matrix::Zero(8, 10'000);
  t.states.row(2).setConstant(0.3);
  const ObservationSequence obs = observe(t, model(ObservationKind::kFull, 0.1), 2024);
  const Matrix noise = obs.y - t.states;
  for (Eigen::Index r = 0; r < noise.rows(); ++r) {
    const double mean = noise.row(r).mean();
    const double sd = std::sqrt((noise.row(r).array() - mean).square().sum() / (noise.cols() - 1));
    EXPECT_GE(sd, 0.097) << "channel " << r;
    EXPECT_LE(sd, 0.103) << "channel " << r;
    EXPECT_LT(std::abs(mean), 0.005) << "channel " << r;
  }
}

TEST(Likelihood, UnitResidual) {
  ObservationSequence obs{model(ObservationKind::kFull, 0.0), Matrix::Zero(8, 1), 0};
  Matrix x = Matrix::Zero(8, 1);
  x(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(neg_log_likelihood(obs, x), 1.0);
}

TEST(Likelihood, HeadingWraps) {
  ObservationSequence obs{model(ObservationKind::kFull, 0.0), Matrix::Zero(8, 1), 0};
  obs.y(2, 0) = -3.1;
  Matrix x = Matrix::Zero(8, 1);
  x(2, 0) = 3.1;
  const double r = 2.0 * std::numbers::pi - 6.2;
  EXPECT_NEAR(std::abs(observation_residuals(obs, x)(2, 0)), r, 1e-12);
  EXPECT_NEAR(neg_log_likelihood(obs, x), r * r, 1e-12);
  EXPECT_NEAR(neg_log_likelihood(obs, x), 6.9e-3, 1e-4);
}

TEST(Likelihood, NoWrapForDoubleIntegrator) {
  const Scenario s = single_player_lq();
  const auto m = make_observation_model(s.game, ObservationKind::kFull, 0.0);
  EXPECT_FALSE(m.wrap_heading);
  ObservationSequence obs{m, Matrix::Zero(4, 1), 0};
  obs.y(2, 0) = -3.1;
  Matrix x = Matrix::Zero(4, 1);
  x(2, 0) = 3.1;
  EXPECT_NEAR(neg_log_likelihood(obs, x), 6.2 * 6.2, 1e-12);
}

TEST(Likelihood, GradientAudit) {
  const Trajectory t = demo();
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? ObservationKind::kPartial : ObservationKind::kFull;
    const ObservationSequence obs = observe(t, model(kind, 0.3), static_cast<std::uint64_t>(trial));
    // stay away from the wrap discontinuity
    const Vector x = t.states.reshaped() + testing::uniform(rng, t.states.size(), -0.5, 0.5);
    const Matrix g = neg_log_likelihood_gradient(obs, x.reshaped(8, t.horizon()));
    const Vector fd = testing::fd_gradient(
        [&](const Vector& z) { return neg_log_likelihood(obs, Matrix(z.reshaped(8, t.horizon()))); }, x);
    worst = std::max(worst, testing::rel_error(g.reshaped(), fd));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Model, Validation) {
  EXPECT_THROW(model(ObservationKind::kFull, -0.1), ConfigError);
  EXPECT_THROW(observation_kind_from_string("lidar"), ConfigError);
  EXPECT_EQ(observation_kind_from_string("partial"), ObservationKind::kPartial);
  const auto m = model(ObservationKind::kPartial, 0.0);
  EXPECT_EQ(observation_row(m, 1, 2), 5);
  EXPECT_EQ(observation_row(m, 1, 3), -1);
  ObservationSequence obs = observe(demo(), m, 1);
  EXPECT_THROW(neg_log_likelihood(obs, Matrix::Zero(8, 3)), ConfigError);
}

TEST(WrapAngle, Range) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(7.0), 7.0 - 2.0 * std::numbers::pi, 1e-15);
}

}  // namespace
}  // namespace invgame
