#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "invgame/forward_game.hpp"
#include "invgame/scenarios.hpp"
#include "support.hpp"

namespace invgame {
namespace {

using testing::fd_jacobian;
using testing::rel_error;

// Finite-horizon discrete LQR for the LQ scenario, written from scratch:
// cost sum_k w0/2 x_k' Q x_k + w1 u_k' u_k, x_{k+1} = A x_k + B u_k.
Matrix riccati_states(const Scenario& s, const Vector& w) {
  const int T = s.game.horizon;
  const double dt = s.game.dt;
  Matrix A = Matrix::Identity(4, 4);
  A(0, 2) = dt;
  A(1, 3) = dt;
  Matrix B = Matrix::Zero(4, 2);
  B(2, 0) = dt;
  B(3, 1) = dt;
  const Eigen::Vector4d q = s.basis.players[0][0].deviation_weights;
  const Matrix Q = 0.5 * w(0) * Matrix(q.asDiagonal());
  const Matrix R = w(1) * Matrix::Identity(2, 2);
  std::vector<Matrix> gains(T - 1);
  Matrix P = Q;  // the last input moves nothing, so x_{T-1} only carries Q
  for (int k = T - 2; k >= 0; --k) {
    const Matrix K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    gains[k] = K;
    P = Q + A.transpose() * P * (A - B * K);
  }
  Matrix x(4, T);
  x.col(0) = s.game.initial_state;
  for (int k = 0; k + 1 < T; ++k) x.col(k + 1) = (A - B * gains[k]) * x.col(k);
  return x;
}

TEST(Riccati, NewtonIbrAndDriverMatchOracle) {
  const Scenario s = single_player_lq();
  const Matrix oracle = riccati_states(s, s.theta_true.weights[0]);
  const Trajectory init = zero_input_initialization(s.game);
  const ForwardSolution newton = solve_olne_newton(s.game, s.basis, s.theta_true, init);
  const ForwardSolution ibr = solve_olne_ibr(s.game, s.basis, s.theta_true, init);
  const ForwardSolution driver = solve_forward(s.game, s.basis, s.theta_true);
  for (const auto* sol : {&newton, &ibr, &driver}) {
    ASSERT_TRUE(sol->converged()) << sol->method;
    EXPECT_LT((sol->trajectory.states - oracle).cwiseAbs().maxCoeff(), 1e-6) << sol->method;
  }
}

TEST(Riccati, OtherWeights) {
  Scenario s = single_player_lq(30, 0.1);
  s.theta_true.weights[0] << 0.05, 0.95;
  const ForwardSolution sol = solve_forward(s.game, s.basis, s.theta_true);
  ASSERT_TRUE(sol.converged());
  EXPECT_LT((sol.trajectory.states - riccati_states(s, s.theta_true.weights[0])).cwiseAbs().maxCoeff(),
            1e-6);
}

TEST(Kkt, LayoutIsConsistent) {
  const Scenario s = two_player_crossing();
  const KktLayout l(s.game);
  EXPECT_EQ(l.primal_size(), 50 * 8 + 50 * 4 + 2 * 49 * 8);
  EXPECT_EQ(l.residual_size(), 2 * (49 * 8 + 50 * 2) + 49 * 8);
  EXPECT_EQ(l.dynamics(0), l.stationarity_size());
  const auto cols = l.staged_unknowns();
  const auto rows = l.staged_residuals();
  EXPECT_EQ(static_cast<Eigen::Index>(cols.size()), l.primal_size() - 8);
  EXPECT_EQ(static_cast<Eigen::Index>(rows.size()), l.residual_size());
  std::vector<char> seen(cols.size(), 0);
  for (auto c : cols) seen.at(c) += 1;
  for (char c : seen) EXPECT_EQ(c, 1);
}

TEST(Kkt, ZeroCostFeasibleIsRoot) {
  const Scenario s = two_player_crossing();
  std::mt19937_64 rng(4);
  Trajectory t = rollout(s.game, s.game.initial_state,
                         testing::uniform(rng, 4 * 50, -0.2, 0.2).reshaped(4, 50));
  CostParameters zero = s.theta_true;
  for (auto& w : zero.weights) w.setZero();
  zero.normalized = false;
  EXPECT_EQ(max_abs(assemble_kkt(s.game, s.basis, t, zero, KktDerivatives::kNone).residual), 0.0);
}

TEST(Kkt, EffortOnlyZeroInputIsRoot) {
  const Scenario s = two_player_crossing();
  CostParameters effort = s.theta_true;
  for (auto& w : effort.weights) w << 0, 0, 0, 0.5, 0.5;
  const Trajectory t = zero_input_initialization(s.game);
  EXPECT_EQ(max_abs(assemble_kkt(s.game, s.basis, t, effort, KktDerivatives::kNone).residual), 0.0);
}

class KktAudit : public ::testing::TestWithParam<int> {};

TEST_P(KktAudit, JacobiansMatchFiniteDifferences) {
  Scenario s = GetParam() == 0 ? two_player_crossing() : five_player_highway();
  s.game.horizon = 6;
  for (auto& p : s.basis.players) {
    for (auto& b : p) b.goal_steps = 2;
  }
  const KktLayout layout(s.game);
  std::mt19937_64 rng(500 + GetParam());
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Trajectory t = testing::random_trajectory(s.game, rng);
    for (int i = 0; i < s.game.players; ++i) {
      t.costates.push_back(testing::uniform(rng, s.game.state_dim() * 5, -1, 1).reshaped(s.game.state_dim(), 5));
    }
    CostParameters theta = s.theta_true;
    for (auto& w : theta.weights) w = testing::uniform(rng, w.size(), 0.01, 1.0);
    theta.normalized = false;
    const KktSystem sys = assemble_kkt(s.game, s.basis, t, theta);
    const Vector z = pack_primal(layout, t);
    const Matrix fd_primal = fd_jacobian(
        [&](const Vector& p) {
          return assemble_kkt(s.game, s.basis, unpack_primal(layout, p), theta, KktDerivatives::kNone)
              .residual;
        },
        z);
    const Matrix fd_theta = fd_jacobian(
        [&](const Vector& w) {
          return assemble_kkt(s.game, s.basis, t, CostParameters::unflatten(w, s.basis),
                              KktDerivatives::kNone)
              .residual;
        },
        theta.flatten());
    worst = std::max(worst, rel_error(Matrix(sys.jacobian), fd_primal));
    worst = std::max(worst, rel_error(Matrix(sys.parameter_jacobian), fd_theta));
  }
  EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, KktAudit, ::testing::Values(0, 1));

TEST(Kkt, PackRoundTrip) {
  const Scenario s = two_player_crossing();
  std::mt19937_64 rng(8);
  Trajectory t = testing::random_trajectory(s.game, rng);
  for (int i = 0; i < 2; ++i) t.costates.push_back(Matrix::Random(8, 49));
  const KktLayout layout(s.game);
  const Trajectory back = unpack_primal(layout, pack_primal(layout, t));
  EXPECT_EQ(back.states, t.states);
  EXPECT_EQ(back.inputs, t.inputs);
  EXPECT_EQ(back.costates[1], t.costates[1]);
}

// Every converged solution passes the Nash certificate of the acceptance list.
void certify(const Scenario& s, const ForwardSolution& sol) {
  ASSERT_TRUE(sol.converged()) << sol.method << " " << to_string(sol.status);
  EXPECT_LE(max_abs(assemble_kkt(s.game, s.basis, sol.trajectory, s.theta_true,
                                 KktDerivatives::kNone).residual),
            1e-6);
  EXPECT_LE(max_abs(dynamics_residual(s.game, sol.trajectory)), 1e-6);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int d = 0; d < 100; ++d) {
    Matrix dir(2, s.game.horizon);
    for (auto& v : dir.reshaped()) v = normal(rng);
    dir /= dir.norm();
    const int player = d % s.game.players;
    worst = std::max(worst, std::abs(unilateral_deviation_check(s.game, s.basis, s.theta_true,
                                                                sol.trajectory, player, dir)));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Crossing, NewtonAndIbrAgreeAndCertify) {
  const Scenario s = two_player_crossing();
  const Trajectory init = zero_input_initialization(s.game);
  const ForwardSolution newton = solve_olne_newton(s.game, s.basis, s.theta_true, init);
  const ForwardSolution ibr = solve_olne_ibr(s.game, s.basis, s.theta_true, init);
  certify(s, newton);
  certify(s, ibr);
  double gap = 0.0;
  for (int k = 0; k < s.game.horizon; ++k) {
    for (int i = 0; i < 2; ++i) {
      gap = std::max(gap, (newton.trajectory.position(i, k) - ibr.trajectory.position(i, k)).norm());
    }
  }
  EXPECT_LT(gap, 1e-3);
}

TEST(Crossing, PathsBend) {
  const Scenario s = two_player_crossing();
  const ForwardSolution sol = solve_forward(s.game, s.basis, s.theta_true);
  certify(s, sol);
  // largest distance from the straight start-goal line, per player
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d a = sol.trajectory.position(i, 0);
    const Eigen::Vector2d b = s.basis.players[i][0].goal;
    const Eigen::Vector2d dir = (b - a).normalized();
    double off = 0.0;
    for (int k = 0; k < s.game.horizon; ++k) {
      const Eigen::Vector2d r = sol.trajectory.position(i, k) - a;
      off = std::max(off, std::abs(dir.x() * r.y() - dir.y() * r.x()));
    }
    EXPECT_GT(off, 0.05) << "player " << i;
  }
}

TEST(Highway, ConvergesAndCertifies) {
  const Scenario s = five_player_highway();
  certify(s, solve_forward(s.game, s.basis, s.theta_true));
}

TEST(Decoupled, ProximityOffEqualsIndependentSolves) {
  Scenario s = two_player_crossing();
  for (auto& w : s.theta_true.weights) w(1) = 0.0;
  s.theta_true.normalized = false;
  IbrOptions opt;
  opt.max_sweeps = 2;  // first sweep solves, second confirms
  const ForwardSolution joint =
      solve_olne_ibr(s.game, s.basis, s.theta_true, zero_input_initialization(s.game), opt);
  ASSERT_TRUE(joint.converged());
  EXPECT_EQ(joint.iterations, 2);
  for (int i = 0; i < 2; ++i) {
    Scenario single;
    single.game = s.game;
    single.game.players = 1;
    single.game.initial_state = s.game.initial_state.segment<4>(4 * i);
    single.basis.players = {s.basis.players[i]};
    single.theta_true.weights = {s.theta_true.weights[i]};
    const ForwardSolution alone = solve_forward(single.game, single.basis, single.theta_true);
    ASSERT_TRUE(alone.converged());
    EXPECT_LT((alone.trajectory.states - joint.trajectory.states.middleRows(4 * i, 4))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-5);
  }
}

TEST(Deviation, ZeroDirectionAndPerturbation) {
  const Scenario s = two_player_crossing();
  const ForwardSolution sol = solve_forward(s.game, s.basis, s.theta_true);
  ASSERT_TRUE(sol.converged());
  const Matrix zero = Matrix::Zero(2, s.game.horizon);
  EXPECT_EQ(unilateral_deviation_check(s.game, s.basis, s.theta_true, sol.trajectory, 0, zero), 0.0);

  Matrix dir = Matrix::Zero(2, s.game.horizon);
  dir(1, 5) = 1.0;
  double previous = 0.0;
  for (double eps : {1e-3, 1e-2, 1e-1}) {
    Matrix inputs = sol.trajectory.inputs;
    inputs(1, 5) += eps;
    const Trajectory moved = rollout(s.game, s.game.initial_state, inputs);
    const double d =
        std::abs(unilateral_deviation_check(s.game, s.basis, s.theta_true, moved, 0, dir));
    EXPECT_GT(d, previous);
    previous = d;
  }
  EXPECT_THROW(unilateral_deviation_check(s.game, s.basis, s.theta_true, sol.trajectory, 0,
                                          Matrix::Zero(2, 3)),
               ConfigError);
}

TEST(Ibr, SinglePlayerIsOptimalControl) {
  const Scenario s = single_player_lq();
  const ForwardSolution ibr =
      solve_olne_ibr(s.game, s.basis, s.theta_true, zero_input_initialization(s.game));
  ASSERT_TRUE(ibr.converged());
  EXPECT_LE(ibr.iterations, 2);
  EXPECT_LT((ibr.trajectory.states - riccati_states(s, s.theta_true.weights[0])).cwiseAbs().maxCoeff(),
            1e-6);
}

TEST(Ibr, SweepCapReported) {
  const Scenario s = two_player_crossing();
  IbrOptions opt;
  opt.max_sweeps = 1;
  const ForwardSolution sol =
      solve_olne_ibr(s.game, s.basis, s.theta_true, zero_input_initialization(s.game), opt);
  EXPECT_EQ(sol.status, ForwardStatus::kMaxIterations);
}

TEST(Forward, DegenerateWeightsAreIllConditioned) {
  // no effort or speed penalty: the best responses have no curvature in the inputs
  Scenario s = two_player_crossing();
  for (auto& w : s.theta_true.weights) w << 0.9, 0.1, 0.0, 0.0, 0.0;
  IbrOptions ibr;
  ibr.max_sweeps = 10;
  NewtonOptions newton;
  newton.max_iterations = 30;
  const ForwardSolution sol = solve_forward(s.game, s.basis, s.theta_true, std::nullopt, ibr, newton);
  EXPECT_EQ(sol.status, ForwardStatus::kIllConditioned);
  EXPECT_FALSE(sol.converged());
}

TEST(Forward, Deterministic) {
  const Scenario s = two_player_crossing();
  const ForwardSolution a = solve_forward(s.game, s.basis, s.theta_true);
  const ForwardSolution b = solve_forward(s.game, s.basis, s.theta_true);
  EXPECT_EQ(a.trajectory.states, b.trajectory.states);
}

TEST(Initialization, Shapes) {
  const Scenario s = five_player_highway();
  const Trajectory z = zero_input_initialization(s.game);
  EXPECT_EQ(z.states.rows(), 20);
  EXPECT_EQ(z.horizon(), 50);
  EXPECT_EQ(max_abs(dynamics_residual(s.game, z)), 0.0);
  const Trajectory line = straight_line_initialization(s.game, s.basis);
  EXPECT_NO_THROW(check_trajectory_shape(s.game, line));
  EXPECT_EQ(line.states.col(0), s.game.initial_state);
}

}  // namespace
}  // namespace invgame
