#pragma once

#include <string>
#include <vector>

#include "invgame/dynamics.hpp"

namespace invgame {

enum class BasisKind {
  kGoal,            // 1(t >= T - t_goal) * |p - p_goal|^2
  kProximity,       // sum over opponents of -log |p - p_o|^2
  kSpeed,           // v^2 (unicycle speed state)
  kInputEffort,     // sum of squared input channels selected by a mask
  kStateDeviation,  // 1/2 (x - x_ref)^T diag(q) (x - x_ref)
};

/// Squared-distance floor of the proximity term is kProximityFloor^2; below it the
/// log is continued by its second-order Taylor expansion in the squared distance.
inline constexpr double kProximityFloor = 1e-3;
inline constexpr double kDefaultControlFloor = 1e-3;

struct BasisDescriptor {
  BasisKind kind = BasisKind::kInputEffort;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  int goal_steps = 0;  // t_goal
  int input_mask = 0;  // bit c selects input channel c
  Eigen::Vector4d reference = Eigen::Vector4d::Zero();
  Eigen::Vector4d deviation_weights = Eigen::Vector4d::Zero();

  static BasisDescriptor Goal(const Eigen::Vector2d& goal, int goal_steps);
  static BasisDescriptor Proximity();
  static BasisDescriptor Speed();
  static BasisDescriptor YawRateEffort();
  static BasisDescriptor AccelerationEffort();
  static BasisDescriptor InputEffort(int mask);
  static BasisDescriptor StateDeviation(const Eigen::Vector4d& reference,
                                        const Eigen::Vector4d& weights);

  /// Control-effort weights carry the strictly positive floor.
  bool is_control_effort() const { return kind == BasisKind::kInputEffort; }
  std::string name() const;
};

/// Ordered basis list per player; parameter dimension k_i = players[i].size().
struct CostBasisSet {
  std::vector<std::vector<BasisDescriptor>> players;

  int player_count() const { return static_cast<int>(players.size()); }
  int dimension(int player) const { return static_cast<int>(players.at(player).size()); }
  int total_dimension() const;
  int offset(int player) const;
};

/// Per-player weight vectors over the basis set.
struct CostParameters {
  std::vector<Vector> weights;
  bool normalized = false;

  Vector flatten() const;
  static CostParameters unflatten(const Vector& flat, const CostBasisSet& basis,
                                  bool normalized = false);
  CostParameters scaled(int player, double factor) const;

  /// Throws DomainError on negative weights, control weights below `control_floor`,
  /// or (when normalized) per-player sums away from one. Throws ConfigError on
  /// dimension mismatch with `basis`.
  void validate(const CostBasisSet& basis, double control_floor = kDefaultControlFloor) const;
};

/// Value and derivatives of one basis term at one time step. Gradients are with
/// respect to the full joint state x_k and the player's own input u_k^i.
struct BasisTerm {
  double value = 0.0;
  Vector grad_x;
  Eigen::Vector2d grad_u = Eigen::Vector2d::Zero();
  Matrix hess_xx;
  Eigen::Matrix2d hess_uu = Eigen::Matrix2d::Zero();
  bool clamped = false;
};

BasisTerm eval_basis_term(const BasisDescriptor& basis, const GameDefinition& game, int player,
                          int k, const Vector& state, const Eigen::Vector2d& input,
                          bool with_hessian = true);

/// Whether the goal indicator is active at zero-based step k.
bool goal_active(int horizon, int goal_steps, int k);

struct BasisTotals {
  Vector totals;  // one entry per basis, summed over time
  bool clamped = false;
};

BasisTotals eval_basis(const GameDefinition& game, const CostBasisSet& basis,
                       const Trajectory& traj, int player);

/// theta_i . eval_basis(...). Throws DomainError on negative weights.
double total_cost(const GameDefinition& game, const CostBasisSet& basis, const Trajectory& traj,
                  const Vector& theta, int player);

struct CostGradients {
  Matrix state;  // n x T, column k = grad_{x_k} g_k^i
  Matrix input;  // 2 x T, column k = grad_{u_k^i} g_k^i
  bool clamped = false;
};

CostGradients cost_gradients(const GameDefinition& game, const CostBasisSet& basis,
                             const Trajectory& traj, const Vector& theta, int player);

/// ceil(T / 4).
int default_goal_steps(int horizon);

}  // namespace invgame
