#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "invgame/objectives.hpp"
#include "invgame/scenarios.hpp"
#include "support.hpp"

namespace invgame {
namespace {

using testing::fd_gradient;
using testing::fd_jacobian;
using testing::rel_error;

Scenario crossing_short(int horizon = 8) {
  Scenario s = two_player_crossing();
  s.game.horizon = horizon;
  for (auto& p : s.basis.players) p[0].goal_steps = default_goal_steps(horizon);
  return s;
}

TEST(EvalBasis, StationaryAtGoalWithOpponentAtUnitDistance) {
  Scenario s = crossing_short();
  const Eigen::Vector2d goal = s.basis.players[0][0].goal;
  Trajectory t;
  t.states = Matrix::Zero(8, s.game.horizon);
  t.inputs = Matrix::Zero(4, s.game.horizon);
  for (int k = 0; k < s.game.horizon; ++k) {
    t.states.block<2, 1>(0, k) = goal;
    t.states.block<2, 1>(4, k) = goal + Eigen::Vector2d(0.6, 0.8);
  }
  const BasisTotals b = eval_basis(s.game, s.basis, t, 0);
  EXPECT_EQ(b.totals(0), 0.0);  // goal
  EXPECT_NEAR(b.totals(1), 0.0, 1e-14);  // -T log 1
  EXPECT_EQ(b.totals(3), 0.0);
  EXPECT_EQ(b.totals(4), 0.0);
  EXPECT_FALSE(b.clamped);
}

TEST(EvalBasis, ConstantSpeed) {
  Scenario s = crossing_short();
  std::mt19937_64 rng(5);
  Trajectory t = testing::random_trajectory(s.game, rng);
  t.states.row(3).setConstant(2.0);
  EXPECT_DOUBLE_EQ(eval_basis(s.game, s.basis, t, 0).totals(2), 4.0 * s.game.horizon);
}

TEST(EvalBasis, MatchesPerStepLoop) {
  Scenario s = crossing_short(12);
  std::mt19937_64 rng(17);
  const Trajectory t = testing::random_trajectory(s.game, rng);
  for (int i = 0; i < 2; ++i) {
    const int me = 4 * i, other = 4 * (1 - i);
    const Eigen::Vector2d goal = s.basis.players[i][0].goal;
    const int t_goal = s.basis.players[i][0].goal_steps;
    Vector expect = Vector::Zero(5);
    for (int k = 0; k < s.game.horizon; ++k) {
      const Eigen::Vector2d p = t.states.block<2, 1>(me, k);
      const Eigen::Vector2d q = t.states.block<2, 1>(other, k);
      if (k + 1 >= s.game.horizon - t_goal) expect(0) += (p - goal).squaredNorm();
      expect(1) += -std::log((p - q).squaredNorm());
      expect(2) += std::pow(t.states(me + 3, k), 2);
      expect(3) += std::pow(t.inputs(2 * i, k), 2);
      expect(4) += std::pow(t.inputs(2 * i + 1, k), 2);
    }
    EXPECT_LT((eval_basis(s.game, s.basis, t, i).totals - expect).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EvalBasis, ClampFlag) {
  Scenario s = crossing_short();
  std::mt19937_64 rng(1);
  Trajectory t = testing::random_trajectory(s.game, rng);
  t.states.block<2, 1>(4, 3) = t.states.block<2, 1>(0, 3);
  EXPECT_TRUE(eval_basis(s.game, s.basis, t, 0).clamped);
  const CostGradients g = cost_gradients(s.game, s.basis, t, s.theta_true.weights[0], 0);
  EXPECT_TRUE(g.clamped);
  EXPECT_TRUE(g.state.allFinite());
}

TEST(TotalCost, OneHotAndLinearity) {
  Scenario s = crossing_short();
  std::mt19937_64 rng(9);
  const Trajectory t = testing::random_trajectory(s.game, rng);
  const Vector totals = eval_basis(s.game, s.basis, t, 1).totals;
  for (int j = 0; j < 5; ++j) {
    EXPECT_DOUBLE_EQ(total_cost(s.game, s.basis, t, Vector::Unit(5, j), 1), totals(j));
  }
  const Vector& w = s.theta_true.weights[1];
  EXPECT_NEAR(total_cost(s.game, s.basis, t, 2.0 * w, 1), 2.0 * total_cost(s.game, s.basis, t, w, 1),
              1e-12);
  Vector bad = w;
  bad(2) = -0.1;
  EXPECT_THROW(total_cost(s.game, s.basis, t, bad, 1), DomainError);
}

TEST(CostParameters, Validation) {
  const Scenario s = crossing_short();
  EXPECT_NO_THROW(s.theta_true.validate(s.basis));
  CostParameters zero = s.theta_true;
  zero.weights[0].setZero();
  EXPECT_THROW(zero.validate(s.basis), DomainError);
  zero.normalized = false;
  EXPECT_THROW(zero.validate(s.basis), DomainError);  // control floor
  EXPECT_NO_THROW(zero.validate(s.basis, 0.0));
  CostParameters unnormalized = s.theta_true.scaled(1, 3.0);
  EXPECT_NO_THROW(unnormalized.validate(s.basis));
  unnormalized.normalized = true;
  EXPECT_THROW(unnormalized.validate(s.basis), DomainError);
  CostParameters short_theta = s.theta_true;
  short_theta.weights[1] = Vector::Ones(4);
  EXPECT_THROW(short_theta.validate(s.basis), ConfigError);
}

TEST(CostParameters, FlattenRoundTrip) {
  const Scenario s = five_player_highway();
  const Vector flat = s.theta_true.flatten();
  ASSERT_EQ(flat.size(), s.basis.total_dimension());
  const CostParameters back = CostParameters::unflatten(flat, s.basis, true);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(back.weights[i], s.theta_true.weights[i]);
  EXPECT_EQ(s.basis.offset(3), 15);
  EXPECT_THROW(CostParameters::unflatten(Vector::Zero(3), s.basis), ConfigError);
}

TEST(CostGradients, ProximitySymmetry) {
  Scenario s = crossing_short();
  std::mt19937_64 rng(21);
  const Trajectory t = testing::random_trajectory(s.game, rng);
  const CostGradients g = cost_gradients(s.game, s.basis, t, Vector::Unit(5, 1), 0);
  EXPECT_LT((g.state.middleRows(0, 2) + g.state.middleRows(4, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CostGradients, EffortGradientVanishesAtZeroInput) {
  Scenario s = crossing_short();
  std::mt19937_64 rng(22);
  Trajectory t = testing::random_trajectory(s.game, rng);
  t.inputs.setZero();
  const CostGradients g = cost_gradients(s.game, s.basis, t, s.theta_true.weights[0], 0);
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CostGradients, ProximityAtHalfSeparation) {
  Scenario s = crossing_short(2);
  Trajectory t;
  t.states = Matrix::Zero(8, 2);
  t.inputs = Matrix::Zero(4, 2);
  t.states(4, 0) = 0.5;
  t.states(4, 1) = 0.3;
  t.states(5, 1) = 0.4;
  const Vector theta = Vector::Unit(5, 1);
  const CostGradients g = cost_gradients(s.game, s.basis, t, theta, 0);
  const Vector z = t.states.reshaped();
  const Vector fd = fd_gradient(
      [&](const Vector& x) {
        Trajectory p = t;
        p.states = x.reshaped(8, 2);
        return total_cost(s.game, s.basis, p, theta, 0);
      },
      z);
  EXPECT_LT(rel_error(g.state.reshaped(), fd), 1e-5);
}

// Gradient and Hessian audit of every basis kind at 100 random points.
class BasisAudit : public ::testing::TestWithParam<int> {};

TEST_P(BasisAudit, FiniteDifferences) {
  const std::vector<Scenario> scenarios = {two_player_crossing(), five_player_highway(),
                                           single_player_lq()};
  const Scenario& s = scenarios[GetParam()];
  std::mt19937_64 rng(100 + GetParam());
  const int n = s.game.state_dim();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Vector x = testing::uniform(rng, n, -1.0, 1.0);
    for (int i = 0; i < s.game.players; ++i) x(4 * i) += 3.0 * i;
    const Eigen::Vector2d u = testing::uniform(rng, 2, -1.0, 1.0);
    const int player = trial % s.game.players;
    const int k = s.game.horizon - 1;  // goal indicator active
    for (const auto& basis : s.basis.players[player]) {
      const BasisTerm term = eval_basis_term(basis, s.game, player, k, x, u, true);
      auto value_x = [&](const Vector& z) {
        return eval_basis_term(basis, s.game, player, k, z, u, false).value;
      };
      auto value_u = [&](const Vector& z) {
        return eval_basis_term(basis, s.game, player, k, x, z, false).value;
      };
      auto grad_x = [&](const Vector& z) {
        return eval_basis_term(basis, s.game, player, k, z, u, false).grad_x;
      };
      auto grad_u = [&](const Vector& z) -> Vector {
        return eval_basis_term(basis, s.game, player, k, x, z, false).grad_u;
      };
      worst = std::max(worst, rel_error(term.grad_x, fd_gradient(value_x, x)));
      worst = std::max(worst, rel_error(term.grad_u, fd_gradient(value_u, Vector(u))));
      worst = std::max(worst, rel_error(term.hess_xx, fd_jacobian(grad_x, x)));
      worst = std::max(worst, rel_error(term.hess_uu, fd_jacobian(grad_u, Vector(u))));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, BasisAudit, ::testing::Values(0, 1, 2));

TEST(CostGradients, TrajectoryLevelAudit) {
  const Scenario s = crossing_short(6);
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory t = testing::random_trajectory(s.game, rng);
    const int player = trial % 2;
    const Vector& w = s.theta_true.weights[player];
    const CostGradients g = cost_gradients(s.game, s.basis, t, w, player);
    const Vector fx = fd_gradient(
        [&](const Vector& z) {
          Trajectory p = t;
          p.states = z.reshaped(t.states.rows(), t.states.cols());
          return total_cost(s.game, s.basis, p, w, player);
        },
        t.states.reshaped());
    const Matrix own = t.inputs.middleRows(2 * player, 2);
    const Vector fu = fd_gradient(
        [&](const Vector& z) {
          Trajectory p = t;
          p.inputs.middleRows(2 * player, 2) = z.reshaped(2, t.inputs.cols());
          return total_cost(s.game, s.basis, p, w, player);
        },
        own.reshaped());
    worst = std::max(worst, rel_error(g.state.reshaped(), fx));
    worst = std::max(worst, rel_error(g.input.reshaped(), fu));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Basis, GoalWindow) {
  EXPECT_EQ(default_goal_steps(50), 13);
  EXPECT_FALSE(goal_active(50, 13, 35));
  EXPECT_TRUE(goal_active(50, 13, 36));
  EXPECT_TRUE(goal_active(50, 13, 49));
}

}  // namespace
}  // namespace invgame
