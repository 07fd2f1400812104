#include "invgame/objectives.hpp"

#include <cmath>
#include <numeric>

namespace invgame {
namespace {

struct LogBarrier {
  double value;
  double first;   // d phi / d s
  double second;  // d^2 phi / d s^2
  bool clamped;
};

// phi(s) = -log(s) for s >= s0, quadratic Taylor continuation below.
LogBarrier neg_log(double s) {
  constexpr double s0 = kProximityFloor * kProximityFloor;
  if (s >= s0) return {-std::log(s), -1.0 / s, 1.0 / (s * s), false};
  const double ds = s - s0;
  return {-std::log(s0) - ds / s0 + ds * ds / (2.0 * s0 * s0), -1.0 / s0 + ds / (s0 * s0),
          1.0 / (s0 * s0), true};
}

void check_player(const GameDefinition& game, const CostBasisSet& basis, int player) {
  if (player < 0 || player >= game.players) throw ConfigError("player index out of range");
  if (basis.player_count() != game.players) {
    throw ConfigError("basis set has " + std::to_string(basis.player_count()) +
                      " players, game has " + std::to_string(game.players));
  }
}

}  // namespace

BasisDescriptor BasisDescriptor::Goal(const Eigen::Vector2d& goal, int goal_steps) {
  BasisDescriptor b;
  b.kind = BasisKind::kGoal;
  b.goal = goal;
  b.goal_steps = goal_steps;
  return b;
}

BasisDescriptor BasisDescriptor::Proximity() {
  BasisDescriptor b;
  b.kind = BasisKind::kProximity;
  return b;
}

BasisDescriptor BasisDescriptor::Speed() {
  BasisDescriptor b;
  b.kind = BasisKind::kSpeed;
  return b;
}

BasisDescriptor BasisDescriptor::InputEffort(int mask) {
  BasisDescriptor b;
  b.kind = BasisKind::kInputEffort;
  b.input_mask = mask;
  return b;
}

BasisDescriptor BasisDescriptor::YawRateEffort() { return InputEffort(0b01); }
BasisDescriptor BasisDescriptor::AccelerationEffort() { return InputEffort(0b10); }

BasisDescriptor BasisDescriptor::StateDeviation(const Eigen::Vector4d& reference,
                                                const Eigen::Vector4d& weights) {
  BasisDescriptor b;
  b.kind = BasisKind::kStateDeviation;
  b.reference = reference;
  b.deviation_weights = weights;
  return b;
}

std::string BasisDescriptor::name() const {
  switch (kind) {
    case BasisKind::kGoal:
      return "goal";
    case BasisKind::kProximity:
      return "proximity";
    case BasisKind::kSpeed:
      return "speed";
    case BasisKind::kInputEffort:
      if (input_mask == 0b01) return "yaw_rate_effort";
      if (input_mask == 0b10) return "acceleration_effort";
      return "input_effort";
    case BasisKind::kStateDeviation:
      return "state_deviation";
  }
  return "unknown";
}

int CostBasisSet::total_dimension() const {
  return std::accumulate(players.begin(), players.end(), 0,
                         [](int acc, const auto& p) { return acc + static_cast<int>(p.size()); });
}

int CostBasisSet::offset(int player) const {
  int off = 0;
  for (int i = 0; i < player; ++i) off += dimension(i);
  return off;
}

Vector CostParameters::flatten() const {
  Eigen::Index total = 0;
  for (const auto& w : weights) total += w.size();
  Vector flat(total);
  Eigen::Index off = 0;
  for (const auto& w : weights) {
    flat.segment(off, w.size()) = w;
    off += w.size();
  }
  return flat;
}

CostParameters CostParameters::unflatten(const Vector& flat, const CostBasisSet& basis,
                                         bool normalized) {
  if (flat.size() != basis.total_dimension()) throw ConfigError("parameter vector size mismatch");
  CostParameters params;
  params.normalized = normalized;
  for (int i = 0; i < basis.player_count(); ++i) {
    params.weights.push_back(flat.segment(basis.offset(i), basis.dimension(i)));
  }
  return params;
}

CostParameters CostParameters::scaled(int player, double factor) const {
  CostParameters out = *this;
  out.weights.at(player) *= factor;
  out.normalized = false;
  return out;
}

void CostParameters::validate(const CostBasisSet& basis, double control_floor) const {
  if (static_cast<int>(weights.size()) != basis.player_count()) {
    throw ConfigError("parameters cover " + std::to_string(weights.size()) + " players, basis " +
                      std::to_string(basis.player_count()));
  }
  for (int i = 0; i < basis.player_count(); ++i) {
    const Vector& w = weights[i];
    if (w.size() != basis.dimension(i)) {
      throw ConfigError("player " + std::to_string(i) + " has " + std::to_string(w.size()) +
                        " weights, basis set expects " + std::to_string(basis.dimension(i)));
    }
    for (int j = 0; j < w.size(); ++j) {
      if (!std::isfinite(w(j)) || w(j) < 0.0) {
        throw DomainError("weight " + std::to_string(j) + " of player " + std::to_string(i) +
                          " is negative or not finite");
      }
      if (basis.players[i][j].is_control_effort() && w(j) < control_floor) {
        throw DomainError("control weight " + std::to_string(j) + " of player " +
                          std::to_string(i) + " is below the floor");
      }
    }
    if (normalized && std::abs(w.sum() - 1.0) > 1e-8) {
      throw DomainError("weights of player " + std::to_string(i) + " do not sum to one");
    }
  }
}

int default_goal_steps(int horizon) { return (horizon + 3) / 4; }

bool goal_active(int horizon, int goal_steps, int k) {
  // one-based t = k + 1 satisfies t >= T - t_goal
  return k + 1 >= horizon - goal_steps;
}

BasisTerm eval_basis_term(const BasisDescriptor& basis, const GameDefinition& game, int player,
                          int k, const Vector& state, const Eigen::Vector2d& input,
                          bool with_hessian) {
  const int n = game.state_dim();
  const int s = kPlayerStateDim * player;
  BasisTerm term;
  term.grad_x = Vector::Zero(n);
  if (with_hessian) term.hess_xx = Matrix::Zero(n, n);

  switch (basis.kind) {
    case BasisKind::kGoal: {
      if (!goal_active(game.horizon, basis.goal_steps, k)) break;
      const Eigen::Vector2d d = state.segment<2>(s) - basis.goal;
      term.value = d.squaredNorm();
      term.grad_x.segment<2>(s) = 2.0 * d;
      if (with_hessian) term.hess_xx.block<2, 2>(s, s).diagonal().setConstant(2.0);
      break;
    }
    case BasisKind::kProximity: {
      for (int o = 0; o < game.players; ++o) {
        if (o == player) continue;
        const int so = kPlayerStateDim * o;
        const Eigen::Vector2d d = state.segment<2>(s) - state.segment<2>(so);
        const LogBarrier phi = neg_log(d.squaredNorm());
        term.value += phi.value;
        term.clamped = term.clamped || phi.clamped;
        const Eigen::Vector2d g = 2.0 * phi.first * d;
        term.grad_x.segment<2>(s) += g;
        term.grad_x.segment<2>(so) -= g;
        if (with_hessian) {
          const Eigen::Matrix2d h = 4.0 * phi.second * d * d.transpose() +
                                    2.0 * phi.first * Eigen::Matrix2d::Identity();
          term.hess_xx.block<2, 2>(s, s) += h;
          term.hess_xx.block<2, 2>(so, so) += h;
          term.hess_xx.block<2, 2>(s, so) -= h;
          term.hess_xx.block<2, 2>(so, s) -= h;
        }
      }
      break;
    }
    case BasisKind::kSpeed: {
      // unicycle: v is entry 3; double integrator: (vx, vy) are entries 2 and 3
      const int first = game.dynamics == DynamicsKind::kUnicycle ? 3 : 2;
      for (int c = first; c < kPlayerStateDim; ++c) {
        const double v = state(s + c);
        term.value += v * v;
        term.grad_x(s + c) = 2.0 * v;
        if (with_hessian) term.hess_xx(s + c, s + c) = 2.0;
      }
      break;
    }
    case BasisKind::kInputEffort: {
      for (int c = 0; c < kPlayerInputDim; ++c) {
        if (!(basis.input_mask & (1 << c))) continue;
        term.value += input(c) * input(c);
        term.grad_u(c) = 2.0 * input(c);
        term.hess_uu(c, c) = 2.0;
      }
      break;
    }
    case BasisKind::kStateDeviation: {
      const Eigen::Vector4d d = state.segment<4>(s) - basis.reference;
      const Eigen::Vector4d qd = basis.deviation_weights.cwiseProduct(d);
      term.value = 0.5 * d.dot(qd);
      term.grad_x.segment<4>(s) = qd;
      if (with_hessian) term.hess_xx.block<4, 4>(s, s).diagonal() = basis.deviation_weights;
      break;
    }
  }
  return term;
}

BasisTotals eval_basis(const GameDefinition& game, const CostBasisSet& basis,
                       const Trajectory& traj, int player) {
  check_player(game, basis, player);
  check_trajectory_shape(game, traj);
  const auto& bases = basis.players[player];
  BasisTotals out{Vector::Zero(static_cast<Eigen::Index>(bases.size())), false};
  for (int k = 0; k < game.horizon; ++k) {
    const Vector x = traj.states.col(k);
    const Eigen::Vector2d u = traj.inputs.block<2, 1>(kPlayerInputDim * player, k);
    for (std::size_t j = 0; j < bases.size(); ++j) {
      const BasisTerm term = eval_basis_term(bases[j], game, player, k, x, u, false);
      out.totals(static_cast<Eigen::Index>(j)) += term.value;
      out.clamped = out.clamped || term.clamped;
    }
  }
  return out;
}

double total_cost(const GameDefinition& game, const CostBasisSet& basis, const Trajectory& traj,
                  const Vector& theta, int player) {
  check_player(game, basis, player);
  if (theta.size() != basis.dimension(player)) throw ConfigError("weight dimension mismatch");
  if ((theta.array() < 0.0).any()) throw DomainError("negative cost weight");
  return theta.dot(eval_basis(game, basis, traj, player).totals);
}

CostGradients cost_gradients(const GameDefinition& game, const CostBasisSet& basis,
                             const Trajectory& traj, const Vector& theta, int player) {
  check_player(game, basis, player);
  check_trajectory_shape(game, traj);
  if (theta.size() != basis.dimension(player)) throw ConfigError("weight dimension mismatch");
  const auto& bases = basis.players[player];
  CostGradients out{Matrix::Zero(game.state_dim(), game.horizon),
                    Matrix::Zero(kPlayerInputDim, game.horizon), false};
  for (int k = 0; k < game.horizon; ++k) {
    const Vector x = traj.states.col(k);
    const Eigen::Vector2d u = traj.inputs.block<2, 1>(kPlayerInputDim * player, k);
    for (std::size_t j = 0; j < bases.size(); ++j) {
      const BasisTerm term = eval_basis_term(bases[j], game, player, k, x, u, false);
      const double w = theta(static_cast<Eigen::Index>(j));
      out.state.col(k) += w * term.grad_x;
      out.input.col(k) += w * term.grad_u;
      out.clamped = out.clamped || term.clamped;
    }
  }
  return out;
}

}  // namespace invgame
