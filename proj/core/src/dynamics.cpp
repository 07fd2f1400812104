#include "invgame/dynamics.hpp"

#include <cmath>

namespace invgame {
namespace {

void check_dims(const Vector& state, const Vector& inputs) {
  if (state.size() % kPlayerStateDim != 0 || state.size() == 0) {
    throw ConfigError("state dimension must be a positive multiple of 4");
  }
  const auto players = state.size() / kPlayerStateDim;
  if (inputs.size() != players * kPlayerInputDim) {
    throw ConfigError("input dimension " + std::to_string(inputs.size()) +
                      " does not match " + std::to_string(players) + " players");
  }
}

}  // namespace

std::string to_string(DynamicsKind kind) {
  switch (kind) {
    case DynamicsKind::kUnicycle:
      return "unicycle";
    case DynamicsKind::kDoubleIntegrator:
      return "double_integrator";
  }
  return "unknown";
}

DynamicsKind dynamics_kind_from_string(const std::string& name) {
  if (name == "unicycle") return DynamicsKind::kUnicycle;
  if (name == "double_integrator") return DynamicsKind::kDoubleIntegrator;
  throw ConfigError("unknown dynamics model '" + name + "'");
}

void GameDefinition::validate() const {
  if (players < 1) throw ConfigError("game needs at least one player");
  if (horizon < 2) throw ConfigError("horizon must be at least 2");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
  if (initial_state.size() != state_dim()) {
    throw ConfigError("initial state has dimension " + std::to_string(initial_state.size()) +
                      ", expected " + std::to_string(state_dim()));
  }
}

Vector step(DynamicsKind kind, const Vector& state, const Vector& inputs, double dt) {
  check_dims(state, inputs);
  const auto players = state.size() / kPlayerStateDim;
  Vector next(state.size());
  for (Eigen::Index i = 0; i < players; ++i) {
    const auto x = state.segment<4>(kPlayerStateDim * i);
    const auto u = inputs.segment<2>(kPlayerInputDim * i);
    auto out = next.segment<4>(kPlayerStateDim * i);
    switch (kind) {
      case DynamicsKind::kUnicycle:
        out(0) = x(0) + dt * x(3) * std::cos(x(2));
        out(1) = x(1) + dt * x(3) * std::sin(x(2));
        out(2) = x(2) + dt * u(0);
        out(3) = x(3) + dt * u(1);
        break;
      case DynamicsKind::kDoubleIntegrator:
        out(0) = x(0) + dt * x(2);
        out(1) = x(1) + dt * x(3);
        out(2) = x(2) + dt * u(0);
        out(3) = x(3) + dt * u(1);
        break;
    }
  }
  return next;
}

Vector step(const GameDefinition& game, const Vector& state, const Vector& inputs) {
  if (state.size() != game.state_dim()) throw ConfigError("state does not match game");
  return step(game.dynamics, state, inputs, game.dt);
}

StepJacobians jacobians(DynamicsKind kind, const Vector& state, const Vector& inputs, double dt) {
  check_dims(state, inputs);
  const auto players = state.size() / kPlayerStateDim;
  StepJacobians jac{Matrix::Identity(state.size(), state.size()),
                    Matrix::Zero(state.size(), inputs.size())};
  for (Eigen::Index i = 0; i < players; ++i) {
    const auto s = kPlayerStateDim * i;
    const auto c = kPlayerInputDim * i;
    switch (kind) {
      case DynamicsKind::kUnicycle: {
        const double psi = state(s + 2);
        const double v = state(s + 3);
        jac.state(s + 0, s + 2) = -dt * v * std::sin(psi);
        jac.state(s + 0, s + 3) = dt * std::cos(psi);
        jac.state(s + 1, s + 2) = dt * v * std::cos(psi);
        jac.state(s + 1, s + 3) = dt * std::sin(psi);
        break;
      }
      case DynamicsKind::kDoubleIntegrator:
        jac.state(s + 0, s + 2) = dt;
        jac.state(s + 1, s + 3) = dt;
        break;
    }
    jac.input(s + 2, c + 0) = dt;
    jac.input(s + 3, c + 1) = dt;
  }
  return jac;
}

Matrix weighted_state_hessian(DynamicsKind kind, const Vector& state, const Vector& weights,
                              double dt) {
  Matrix hess = Matrix::Zero(state.size(), state.size());
  if (kind == DynamicsKind::kDoubleIntegrator) return hess;
  const auto players = state.size() / kPlayerStateDim;
  for (Eigen::Index i = 0; i < players; ++i) {
    const auto s = kPlayerStateDim * i;
    const double psi = state(s + 2);
    const double v = state(s + 3);
    const double wx = weights(s + 0);
    const double wy = weights(s + 1);
    const double c = std::cos(psi);
    const double sn = std::sin(psi);
    // rows px and py only; psi and v are linear
    hess(s + 2, s + 2) = -dt * v * (wx * c + wy * sn);
    const double cross = dt * (-wx * sn + wy * c);
    hess(s + 2, s + 3) = cross;
    hess(s + 3, s + 2) = cross;
  }
  return hess;
}

Trajectory rollout(const GameDefinition& game, const Vector& x1, const Matrix& inputs) {
  game.validate();
  if (x1.size() != game.state_dim()) throw ConfigError("initial state does not match game");
  if (inputs.rows() != game.input_dim() || inputs.cols() != game.horizon) {
    throw ConfigError("input sequence must be " + std::to_string(game.input_dim()) + " x " +
                      std::to_string(game.horizon));
  }
  Trajectory traj;
  traj.states.resize(game.state_dim(), game.horizon);
  traj.inputs = inputs;
  traj.states.col(0) = x1;
  for (int k = 0; k + 1 < game.horizon; ++k) {
    traj.states.col(k + 1) = step(game.dynamics, traj.states.col(k), inputs.col(k), game.dt);
  }
  traj.feasible = true;
  return traj;
}

void check_trajectory_shape(const GameDefinition& game, const Trajectory& traj) {
  if (traj.states.rows() != game.state_dim() || traj.states.cols() != game.horizon ||
      traj.inputs.rows() != game.input_dim() || traj.inputs.cols() != game.horizon) {
    throw ConfigError("trajectory shape does not match game definition");
  }
}

Vector dynamics_residual(const GameDefinition& game, const Trajectory& traj) {
  check_trajectory_shape(game, traj);
  const int n = game.state_dim();
  Vector residual(static_cast<Eigen::Index>(game.horizon - 1) * n);
  for (int k = 0; k + 1 < game.horizon; ++k) {
    residual.segment(static_cast<Eigen::Index>(k) * n, n) =
        traj.states.col(k + 1) -
        step(game.dynamics, traj.states.col(k), traj.inputs.col(k), game.dt);
  }
  return residual;
}

}  // namespace invgame
