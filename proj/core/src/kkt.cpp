#include <Eigen/SparseCholesky>

#include "invgame/forward_game.hpp"

namespace invgame {
namespace {

template <typename Derived>
void add_block(Triplets& out, Eigen::Index row, Eigen::Index col,
               const Eigen::MatrixBase<Derived>& block, double scale = 1.0) {
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      const double v = block(r, c);
      if (v != 0.0) out.emplace_back(row + r, col + c, scale * v);
    }
  }
}

void add_identity(Triplets& out, Eigen::Index row, Eigen::Index col, Eigen::Index size,
                  double scale = 1.0) {
  for (Eigen::Index r = 0; r < size; ++r) out.emplace_back(row + r, col + r, scale);
}

}  // namespace

KktLayout::KktLayout(const GameDefinition& game)
    : N_(game.players), T_(game.horizon), n_(game.state_dim()), m_(game.input_dim()) {}

std::vector<Eigen::Index> KktLayout::staged_unknowns() const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(primal_size() - n_));
  for (int k = 0; k < T_; ++k) {
    for (int c = 0; c < m_; ++c) out.push_back(input(k) + c - n_);
    if (k + 1 == T_) break;
    for (int c = 0; c < n_; ++c) out.push_back(state(k + 1) + c - n_);
    for (int i = 0; i < N_; ++i) {
      for (int c = 0; c < n_; ++c) out.push_back(costate(i, k) + c - n_);
    }
  }
  return out;
}

std::vector<Eigen::Index> KktLayout::staged_residuals() const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(residual_size()));
  for (int k = 0; k < T_; ++k) {
    for (int i = 0; i < N_; ++i) {
      for (int c = 0; c < kPlayerInputDim; ++c) out.push_back(input_stationarity(i, k) + c);
    }
    if (k + 1 == T_) break;
    for (int c = 0; c < n_; ++c) out.push_back(dynamics(k) + c);
    for (int i = 0; i < N_; ++i) {
      for (int c = 0; c < n_; ++c) out.push_back(state_stationarity(i, k + 1) + c);
    }
  }
  return out;
}

Vector pack_primal(const KktLayout& layout, const Trajectory& traj) {
  Vector primal = Vector::Zero(layout.primal_size());
  primal.head(layout.states_size()) = traj.states.reshaped();
  primal.segment(layout.states_size(), layout.inputs_size()) = traj.inputs.reshaped();
  if (traj.has_costates()) {
    for (int i = 0; i < layout.players(); ++i) {
      primal.segment(layout.costate(i, 0), static_cast<Eigen::Index>(layout.horizon() - 1) *
                                               layout.state_dim()) = traj.costates[i].reshaped();
    }
  }
  return primal;
}

Trajectory unpack_primal(const KktLayout& layout, const Vector& primal) {
  if (primal.size() != layout.primal_size()) throw ConfigError("primal vector size mismatch");
  const int n = layout.state_dim();
  const int m = layout.input_dim();
  const int T = layout.horizon();
  Trajectory traj;
  traj.states = primal.head(layout.states_size()).reshaped(n, T);
  traj.inputs = primal.segment(layout.states_size(), layout.inputs_size()).reshaped(m, T);
  for (int i = 0; i < layout.players(); ++i) {
    traj.costates.push_back(
        primal.segment(layout.costate(i, 0), static_cast<Eigen::Index>(T - 1) * n)
            .reshaped(n, T - 1));
  }
  return traj;
}

KktSystem assemble_kkt(const GameDefinition& game, const CostBasisSet& basis,
                       const Trajectory& traj, const CostParameters& theta,
                       KktDerivatives derivatives) {
  game.validate();
  check_trajectory_shape(game, traj);
  if (basis.player_count() != game.players ||
      static_cast<int>(theta.weights.size()) != game.players) {
    throw ConfigError("basis set or parameters do not match the player count");
  }
  for (int i = 0; i < game.players; ++i) {
    if (theta.weights[i].size() != basis.dimension(i)) {
      throw ConfigError("parameter dimension mismatch for player " + std::to_string(i));
    }
  }
  if (traj.has_costates() &&
      (static_cast<int>(traj.costates.size()) != game.players ||
       traj.costates[0].rows() != game.state_dim() || traj.costates[0].cols() != game.horizon - 1)) {
    throw ConfigError("costate shape does not match game definition");
  }

  const KktLayout layout(game);
  const int n = game.state_dim();
  const int T = game.horizon;
  const bool primal = derivatives != KktDerivatives::kNone;
  const bool params = derivatives == KktDerivatives::kAll;

  KktSystem sys;
  sys.layout = layout;
  sys.residual = Vector::Zero(layout.residual_size());
  Triplets jac;
  Triplets pjac;
  const Vector zero_costate = Vector::Zero(n);
  auto costate = [&](int i, int k) -> Vector {
    return traj.has_costates() ? Vector(traj.costates[i].col(k)) : zero_costate;
  };

  for (int k = 0; k < T; ++k) {
    const Vector x = traj.states.col(k);
    const Vector u = traj.inputs.col(k);
    const bool has_next = k + 1 < T;
    StepJacobians dyn;
    if (has_next) {
      dyn = jacobians(game.dynamics, x, u, game.dt);
      const Eigen::Index row = layout.dynamics(k);
      sys.residual.segment(row, n) = traj.states.col(k + 1) - step(game.dynamics, x, u, game.dt);
      if (primal) {
        add_identity(jac, row, layout.state(k + 1), n);
        add_block(jac, row, layout.state(k), dyn.state, -1.0);
        add_block(jac, row, layout.input(k), dyn.input, -1.0);
      }
    }

    for (int i = 0; i < game.players; ++i) {
      const auto& bases = basis.players[i];
      const Vector& w = theta.weights[i];
      const Eigen::Vector2d ui = u.segment<2>(kPlayerInputDim * i);
      Vector grad_x = Vector::Zero(n);
      Eigen::Vector2d grad_u = Eigen::Vector2d::Zero();
      Matrix hess_xx = primal ? Matrix::Zero(n, n) : Matrix();
      Eigen::Matrix2d hess_uu = Eigen::Matrix2d::Zero();
      const Eigen::Index theta_offset = basis.offset(i);

      for (std::size_t j = 0; j < bases.size(); ++j) {
        const BasisTerm term = eval_basis_term(bases[j], game, i, k, x, ui, primal);
        const double wj = w(static_cast<Eigen::Index>(j));
        grad_x += wj * term.grad_x;
        grad_u += wj * term.grad_u;
        sys.clamped = sys.clamped || term.clamped;
        if (primal) {
          hess_xx += wj * term.hess_xx;
          hess_uu += wj * term.hess_uu;
        }
        if (params) {
          const Eigen::Index col = theta_offset + static_cast<Eigen::Index>(j);
          add_block(pjac, layout.input_stationarity(i, k), col, term.grad_u);
          if (k >= 1) add_block(pjac, layout.state_stationarity(i, k), col, term.grad_x);
        }
      }

      const Eigen::Index urow = layout.input_stationarity(i, k);
      Eigen::Vector2d su = grad_u;
      if (has_next) {
        const Vector lam = costate(i, k);
        su -= dyn.input.middleCols<2>(kPlayerInputDim * i).transpose() * lam;
      }
      sys.residual.segment<2>(urow) = su;
      if (primal) {
        add_block(jac, urow, layout.input(k, i), hess_uu);
        if (has_next) {
          add_block(jac, urow, layout.costate(i, k),
                    dyn.input.middleCols<2>(kPlayerInputDim * i).transpose(), -1.0);
        }
      }

      if (k >= 1) {
        const Eigen::Index xrow = layout.state_stationarity(i, k);
        Vector sx = grad_x + costate(i, k - 1);
        if (has_next) sx -= dyn.state.transpose() * costate(i, k);
        sys.residual.segment(xrow, n) = sx;
        if (primal) {
          if (has_next) {
            hess_xx -= weighted_state_hessian(game.dynamics, x, costate(i, k), game.dt);
            add_block(jac, xrow, layout.costate(i, k), dyn.state.transpose(), -1.0);
          }
          add_block(jac, xrow, layout.state(k), hess_xx);
          add_identity(jac, xrow, layout.costate(i, k - 1), n);
        }
      }
    }
  }

  if (primal) {
    sys.jacobian.resize(layout.residual_size(), layout.primal_size());
    sys.jacobian.setFromTriplets(jac.begin(), jac.end());
  }
  if (params) {
    sys.parameter_jacobian.resize(layout.residual_size(), basis.total_dimension());
    sys.parameter_jacobian.setFromTriplets(pjac.begin(), pjac.end());
  }
  return sys;
}

std::vector<Matrix> fit_costates(const GameDefinition& game, const CostBasisSet& basis,
                                 const Trajectory& traj, const CostParameters& theta) {
  Trajectory zeroed = traj;
  zeroed.costates.clear();
  const KktSystem sys = assemble_kkt(game, basis, zeroed, theta, KktDerivatives::kPrimal);
  const KktLayout& layout = sys.layout;
  const Eigen::Index rows = layout.stationarity_size();
  const Eigen::Index cols = layout.costates_size();
  // stationarity is affine in the costates
  const SparseMatrix jl =
      SparseMatrix(sys.jacobian.rightCols(cols)).topRows(rows);
  const Vector s0 = sys.residual.head(rows);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(SparseMatrix(jl.transpose() * jl));
  if (ldlt.info() != Eigen::Success) throw DomainError("costate least-squares system is singular");
  const Vector lambda = ldlt.solve(-(jl.transpose() * s0));
  std::vector<Matrix> costates;
  const int n = game.state_dim();
  for (int i = 0; i < game.players; ++i) {
    costates.push_back(
        lambda.segment(static_cast<Eigen::Index>(i) * (game.horizon - 1) * n,
                       static_cast<Eigen::Index>(game.horizon - 1) * n)
            .reshaped(n, game.horizon - 1));
  }
  return costates;
}

}  // namespace invgame
