#pragma once

#include <optional>
#include <string>
#include <vector>

#include "invgame/types.hpp"

namespace invgame {

inline constexpr int kPlayerStateDim = 4;
inline constexpr int kPlayerInputDim = 2;

/// Per-player discrete-time model. Both use a 4-dim state and a 2-dim input.
///  - kUnicycle: state (px, py, psi, v), input (omega, a), explicit Euler.
///  - kDoubleIntegrator: state (px, py, vx, vy), input (ax, ay).
enum class DynamicsKind { kUnicycle, kDoubleIntegrator };

std::string to_string(DynamicsKind kind);
DynamicsKind dynamics_kind_from_string(const std::string& name);

struct UnicycleState {
  double px = 0.0;
  double py = 0.0;
  double psi = 0.0;  // unwrapped
  double v = 0.0;

  Eigen::Vector4d to_vector() const { return {px, py, psi, v}; }
  static UnicycleState from_vector(const Eigen::Ref<const Eigen::Vector4d>& x) {
    return {x(0), x(1), x(2), x(3)};
  }
};

struct PlayerInput {
  double omega = 0.0;
  double a = 0.0;

  Eigen::Vector2d to_vector() const { return {omega, a}; }
};

/// Everything that fixes a game except the player objectives.
struct GameDefinition {
  std::string name;
  int players = 1;
  int horizon = 50;  // T, number of states in a trajectory
  double dt = 0.5;
  DynamicsKind dynamics = DynamicsKind::kUnicycle;
  Vector initial_state;  // x_1, length 4 * players

  int state_dim() const { return kPlayerStateDim * players; }
  int input_dim() const { return kPlayerInputDim * players; }

  /// Throws ConfigError unless N >= 1, T >= 2, dt > 0 and x_1 has length 4N.
  void validate() const;
};

/// States are stored one column per time step (n x T); inputs likewise (m x T).
/// Costates, when present, hold one n x (T-1) matrix per player where column k
/// multiplies the dynamics constraint between steps k and k+1.
struct Trajectory {
  Matrix states;
  Matrix inputs;
  std::vector<Matrix> costates;
  bool feasible = false;

  int horizon() const { return static_cast<int>(states.cols()); }
  bool has_costates() const { return !costates.empty(); }

  Eigen::Vector2d position(int player, int k) const {
    return states.block<2, 1>(kPlayerStateDim * player, k);
  }
};

struct StepJacobians {
  Matrix state;  // df/dx, n x n
  Matrix input;  // df/du, n x m
};

/// One step of the joint dynamics with every player's block updated independently.
Vector step(DynamicsKind kind, const Vector& state, const Vector& inputs, double dt);
Vector step(const GameDefinition& game, const Vector& state, const Vector& inputs);

/// Analytic Jacobians of `step`; both are block-diagonal per player.
StepJacobians jacobians(DynamicsKind kind, const Vector& state, const Vector& inputs, double dt);

/// sum_r w_r * d^2 f_r / dx^2 for the joint step map. The inputs enter linearly
/// in both models, so no mixed state/input curvature exists.
Matrix weighted_state_hessian(DynamicsKind kind, const Vector& state, const Vector& weights,
                              double dt);

/// Forward simulation of `inputs` (m x T) from x1. The last input column does not
/// influence any state but is kept so trajectories carry T inputs.
Trajectory rollout(const GameDefinition& game, const Vector& x1, const Matrix& inputs);

/// Stacked x_{k+1} - f(x_k, u_k) for k = 0..T-2, length (T-1) n.
Vector dynamics_residual(const GameDefinition& game, const Trajectory& traj);

/// Throws ConfigError if the trajectory shape does not match the game.
void check_trajectory_shape(const GameDefinition& game, const Trajectory& traj);

}  // namespace invgame
