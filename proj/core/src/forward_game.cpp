#include "invgame/forward_game.hpp"

#include <cmath>
#include <limits>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

namespace invgame {
namespace {

Trajectory with_initial_state(const GameDefinition& game, Trajectory traj) {
  traj.states.col(0) = game.initial_state;
  if (!traj.has_costates()) {
    traj.costates.assign(game.players, Matrix::Zero(game.state_dim(), game.horizon - 1));
  }
  return traj;
}

ForwardSolution finalize(const GameDefinition& game, const CostBasisSet& basis,
                         const CostParameters& theta, Trajectory traj, ForwardStatus status,
                         int iterations, std::string method) {
  ForwardSolution sol;
  sol.dynamics_residual_norm = max_abs(dynamics_residual(game, traj));
  traj.feasible = sol.dynamics_residual_norm <= 1e-6;
  sol.residual_norm = max_abs(assemble_kkt(game, basis, traj, theta, KktDerivatives::kNone).residual);
  sol.trajectory = std::move(traj);
  sol.status = status;
  sol.iterations = iterations;
  sol.method = std::move(method);
  return sol;
}

// Player i's open-loop optimal control problem with the opponents' inputs fixed,
// in single-shooting form over u^i_0 .. u^i_{T-1}. The reduced Hessian is exact:
// first-order state sensitivities plus the adjoint-weighted dynamics curvature.
// Relies on the per-player dynamics being decoupled (block-diagonal Jacobians).
class BestResponseProblem {
 public:
  BestResponseProblem(const GameDefinition& game, const CostBasisSet& basis, const Vector& theta,
                      int player, const Matrix& joint_inputs)
      : game_(game), basis_(basis), theta_(theta), player_(player), inputs_(joint_inputs) {}

  Eigen::Index dimension() const { return 2 * static_cast<Eigen::Index>(game_.horizon); }

  Vector pack(const Matrix& joint_inputs) const {
    return joint_inputs.middleRows<2>(kPlayerInputDim * player_).reshaped();
  }

  Matrix inputs(const Vector& z) const {
    Matrix u = inputs_;
    u.middleRows<2>(kPlayerInputDim * player_) = z.reshaped(2, game_.horizon);
    return u;
  }

  ObjectiveEval objective(const Vector& z) const {
    const int T = game_.horizon;
    const int s = kPlayerStateDim * player_;
    const int c = kPlayerInputDim * player_;
    const Matrix u = inputs(z);
    const Trajectory traj = rollout(game_, game_.initial_state, u);
    const auto& bases = basis_.players[player_];

    // stage costs restricted to the player's own state block
    std::vector<Eigen::Vector4d> gx(T, Eigen::Vector4d::Zero());
    std::vector<Eigen::Matrix4d> qxx(T, Eigen::Matrix4d::Zero());
    ObjectiveEval e;
    e.gradient = Vector::Zero(dimension());
    Matrix hess = Matrix::Zero(dimension(), dimension());
    for (int k = 0; k < T; ++k) {
      const Vector xk = traj.states.col(k);
      const Eigen::Vector2d uk = u.block<2, 1>(c, k);
      for (std::size_t j = 0; j < bases.size(); ++j) {
        const double w = theta_(static_cast<Eigen::Index>(j));
        if (w == 0.0) continue;
        const BasisTerm term = eval_basis_term(bases[j], game_, player_, k, xk, uk, true);
        e.value += w * term.value;
        e.gradient.segment<2>(2 * k) += w * term.grad_u;
        hess.block<2, 2>(2 * k, 2 * k) += w * term.hess_uu;
        gx[k] += w * term.grad_x.segment<4>(s);
        qxx[k] += w * term.hess_xx.block<4, 4>(s, s);
      }
    }

    std::vector<Eigen::Matrix4d> a(T);
    std::vector<Eigen::Matrix<double, 4, 2>> b(T);
    for (int k = 0; k + 1 < T; ++k) {
      const StepJacobians d = jacobians(game_.dynamics, traj.states.col(k), u.col(k), game_.dt);
      a[k] = d.state.block<4, 4>(s, s);
      b[k] = d.input.block<4, 2>(s, c);
    }

    // adjoint pass: p[k] = dJ/dx_k (own block)
    std::vector<Eigen::Vector4d> p(T);
    p[T - 1] = gx[T - 1];
    for (int k = T - 2; k >= 0; --k) {
      p[k] = gx[k] + a[k].transpose() * p[k + 1];
      e.gradient.segment<2>(2 * k) += b[k].transpose() * p[k + 1];
    }

    // forward sensitivity pass
    Matrix sens = Matrix::Zero(4, dimension());
    for (int k = 1; k < T; ++k) {
      Matrix next = a[k - 1] * sens;
      next.middleCols<2>(2 * (k - 1)) += b[k - 1];
      sens = std::move(next);
      Vector weights = Vector::Zero(game_.state_dim());
      Eigen::Matrix4d curvature = qxx[k];
      if (k + 1 < T) {
        weights.segment<4>(s) = p[k + 1];
        curvature += weighted_state_hessian(game_.dynamics, traj.states.col(k), weights, game_.dt)
                         .block<4, 4>(s, s);
      }
      // only the first 2k columns of sens are nonzero
      const Eigen::Index active = 2 * static_cast<Eigen::Index>(k);
      hess.topLeftCorner(active, active) +=
          sens.leftCols(active).transpose() * curvature * sens.leftCols(active);
    }
    e.hessian = hess.sparseView();
    return e;
  }

 private:
  const GameDefinition& game_;
  const CostBasisSet& basis_;
  const Vector& theta_;
  int player_;
  Matrix inputs_;
};

}  // namespace

std::string to_string(ForwardStatus status) {
  switch (status) {
    case ForwardStatus::kConverged:
      return "converged";
    case ForwardStatus::kMaxIterations:
      return "max-iterations";
    case ForwardStatus::kIllConditioned:
      return "ill-conditioned";
  }
  return "unknown";
}

ForwardSolution solve_olne_newton(const GameDefinition& game, const CostBasisSet& basis,
                                  const CostParameters& theta, const Trajectory& init,
                                  const NewtonOptions& options) {
  game.validate();
  check_trajectory_shape(game, init);
  const KktLayout layout(game);
  const Eigen::Index n = game.state_dim();
  const Eigen::Index unknowns = layout.primal_size() - n;

  Vector primal = pack_primal(layout, with_initial_state(game, init));
  auto trajectory_of = [&](const Vector& p) { return unpack_primal(layout, p); };
  auto residual_of = [&](const Vector& p) {
    return assemble_kkt(game, basis, trajectory_of(p), theta, KktDerivatives::kNone).residual;
  };

  // P_r J P_c^T with (P_r J P_c^T)(a, b) = J(rows[a], cols[b])
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> row_perm(unknowns);
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> col_perm(unknowns);
  {
    const auto rows = layout.staged_residuals();
    const auto cols = layout.staged_unknowns();
    for (Eigen::Index j = 0; j < unknowns; ++j) {
      row_perm.indices()(rows[j]) = static_cast<int>(j);
      col_perm.indices()(cols[j]) = static_cast<int>(j);
    }
  }
  SparseMatrix identity(unknowns, unknowns);
  identity.setIdentity();

  ForwardStatus status = ForwardStatus::kMaxIterations;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const KktSystem sys = assemble_kkt(game, basis, trajectory_of(primal), theta,
                                       KktDerivatives::kPrimal);
    if (!sys.residual.allFinite()) {
      status = ForwardStatus::kIllConditioned;
      break;
    }
    if (max_abs(sys.residual) <= options.tolerance) {
      status = ForwardStatus::kConverged;
      break;
    }
    // staged permutation keeps the factorization banded in time
    const SparseMatrix jac = row_perm * SparseMatrix(sys.jacobian.rightCols(unknowns)) *
                             col_perm.transpose();
    const Vector rhs = -(row_perm * sys.residual);
    const double merit = 0.5 * sys.residual.squaredNorm();

    bool stepped = false;
    for (double mu = options.initial_regularization; mu <= options.max_regularization;
         mu *= options.regularization_growth) {
      SparseMatrix system = jac + mu * identity;
      system.makeCompressed();
      Eigen::SparseLU<SparseMatrix, Eigen::NaturalOrdering<int>> lu;
      lu.compute(system);
      if (lu.info() != Eigen::Success) continue;
      const Vector direction = col_perm.transpose() * Vector(lu.solve(rhs));
      if (lu.info() != Eigen::Success || !direction.allFinite()) continue;

      for (double alpha = 1.0; alpha >= 1e-8; alpha *= 0.5) {
        Vector trial = primal;
        trial.tail(unknowns) += alpha * direction;
        const Vector r = residual_of(trial);
        if (!r.allFinite()) continue;
        if (0.5 * r.squaredNorm() <= merit * (1.0 - 2.0 * options.armijo * alpha)) {
          primal = std::move(trial);
          stepped = true;
          break;
        }
      }
      if (stepped) break;
    }
    if (!stepped) {
      status = ForwardStatus::kIllConditioned;
      break;
    }
  }
  return finalize(game, basis, theta, trajectory_of(primal), status, iter, "newton");
}

ForwardSolution solve_olne_ibr(const GameDefinition& game, const CostBasisSet& basis,
                               const CostParameters& theta, const Trajectory& init,
                               const IbrOptions& options) {
  game.validate();
  check_trajectory_shape(game, init);
  Matrix inputs = init.inputs;
  bool settled = false;
  int sweep = 0;
  for (; sweep < options.max_sweeps && !settled; ++sweep) {
    const Matrix before = inputs;
    for (int i = 0; i < game.players; ++i) {
      const BestResponseProblem br(game, basis, theta.weights[i], i, inputs);
      NlpProblem problem;
      problem.dimension = static_cast<int>(br.dimension());
      problem.objective = [&br](const Vector& z) { return br.objective(z); };
      problem.lower = Vector::Constant(problem.dimension, -std::numeric_limits<double>::infinity());
      problem.upper = Vector::Constant(problem.dimension, std::numeric_limits<double>::infinity());
      const NlpSolution sol = solve(problem, br.pack(inputs), options.inner);
      if (sol.status == SolveStatus::kDiverged) {
        return finalize(game, basis, theta, with_initial_state(game, rollout(game, game.initial_state, inputs)),
                        ForwardStatus::kIllConditioned, sweep + 1, "ibr");
      }
      inputs = br.inputs(sol.z);
    }
    settled = max_abs((inputs - before).reshaped()) <= options.input_tolerance;
  }

  Trajectory joint = rollout(game, game.initial_state, inputs);
  if (!joint.states.allFinite()) {
    return finalize(game, basis, theta, with_initial_state(game, init), ForwardStatus::kIllConditioned,
                    sweep, "ibr");
  }
  joint.costates = fit_costates(game, basis, joint, theta);
  ForwardSolution out = finalize(game, basis, theta, joint, ForwardStatus::kMaxIterations, sweep, "ibr");
  if (settled && out.residual_norm <= options.kkt_tolerance) out.status = ForwardStatus::kConverged;
  return out;
}

double unilateral_deviation_check(const GameDefinition& game, const CostBasisSet& basis,
                                  const CostParameters& theta, const Trajectory& solution,
                                  int player, const Matrix& direction) {
  if (direction.rows() != kPlayerInputDim || direction.cols() != game.horizon) {
    throw ConfigError("deviation direction must be 2 x T");
  }
  if (direction.isZero(0.0)) return 0.0;
  constexpr double h = 1e-5;
  auto cost_at = [&](double alpha) {
    Matrix u = solution.inputs;
    u.middleRows<2>(kPlayerInputDim * player) += alpha * direction;
    return total_cost(game, basis, rollout(game, game.initial_state, u), theta.weights.at(player),
                      player);
  };
  return (cost_at(h) - cost_at(-h)) / (2.0 * h);
}

Trajectory zero_input_initialization(const GameDefinition& game) {
  game.validate();
  return rollout(game, game.initial_state, Matrix::Zero(game.input_dim(), game.horizon));
}

Trajectory straight_line_initialization(const GameDefinition& game, const CostBasisSet& basis) {
  Trajectory traj = zero_input_initialization(game);
  traj.feasible = false;
  const double duration = (game.horizon - 1) * game.dt;
  for (int i = 0; i < game.players; ++i) {
    const int s = kPlayerStateDim * i;
    const Eigen::Vector4d x0 = game.initial_state.segment<4>(s);
    std::optional<Eigen::Vector2d> target;
    std::optional<double> speed;
    for (const auto& b : basis.players.at(i)) {
      if (b.kind == BasisKind::kGoal) target = b.goal;
      if (b.kind == BasisKind::kStateDeviation) {
        speed = b.deviation_weights(3) > 0.0 ? b.reference(3) : x0(3);
        double y = b.deviation_weights(1) > 0.0 ? b.reference(1) : x0(1);
        const double heading = game.dynamics == DynamicsKind::kUnicycle ? x0(2) : 0.0;
        target = Eigen::Vector2d(x0(0) + *speed * duration * std::cos(heading), y);
      }
    }
    if (!target) continue;
    const Eigen::Vector2d p0 = x0.head<2>();
    const Eigen::Vector2d delta = *target - p0;
    const double v = delta.norm() / duration;
    const double heading = std::atan2(delta.y(), delta.x());
    for (int k = 1; k < game.horizon; ++k) {
      const double frac = static_cast<double>(k) / (game.horizon - 1);
      traj.states.block<2, 1>(s, k) = p0 + frac * delta;
      if (game.dynamics == DynamicsKind::kUnicycle) {
        traj.states(s + 2, k) = heading;
        traj.states(s + 3, k) = v;
      } else {
        traj.states.block<2, 1>(s + 2, k) = delta / duration;
      }
    }
    for (int k = 0; k + 1 < game.horizon; ++k) {
      traj.inputs.block<2, 1>(kPlayerInputDim * i, k) =
          (traj.states.block<2, 1>(s + 2, k + 1) - traj.states.block<2, 1>(s + 2, k)) / game.dt;
    }
  }
  return traj;
}

ForwardSolution solve_forward(const GameDefinition& game, const CostBasisSet& basis,
                              const CostParameters& theta,
                              const std::optional<Trajectory>& extra_init, const IbrOptions& ibr,
                              const NewtonOptions& newton) {
  std::vector<Trajectory> inits{zero_input_initialization(game),
                                straight_line_initialization(game, basis)};
  if (extra_init) inits.push_back(*extra_init);
  ForwardSolution last;
  for (const auto& init : inits) {
    // a degenerate theta can break an attempt outright; that only rules out this init
    try {
      const ForwardSolution via_ibr = solve_olne_ibr(game, basis, theta, init, ibr);
      if (via_ibr.residual_norm < 1.0 || via_ibr.converged()) {
        ForwardSolution polished = solve_olne_newton(game, basis, theta, via_ibr.trajectory, newton);
        if (polished.converged()) {
          polished.method = "ibr+newton";
          return polished;
        }
      }
    } catch (const DomainError&) {
    }
    try {
      ForwardSolution direct = solve_olne_newton(game, basis, theta, init, newton);
      if (direct.converged()) return direct;
      last = std::move(direct);
    } catch (const DomainError&) {
    }
  }
  if (last.trajectory.states.size() == 0) {
    last.trajectory = zero_input_initialization(game);
    last.residual_norm = std::numeric_limits<double>::infinity();
    last.method = "none";
  }
  last.status = ForwardStatus::kIllConditioned;
  return last;
}

}  // namespace invgame
