#include "invgame/inverse_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace invgame {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector parameter_lower_bounds(const CostBasisSet& basis, const InverseConfig& config) {
  Vector lower = Vector::Zero(basis.total_dimension());
  for (int i = 0; i < basis.player_count(); ++i) {
    for (int j = 0; j < basis.dimension(i); ++j) {
      if (basis.players[i][j].is_control_effort()) lower(basis.offset(i) + j) = config.control_floor;
    }
  }
  return lower;
}

void check_observations(const ObservationSequence& obs, const GameDefinition& game) {
  game.validate();
  if (obs.model.players != game.players || obs.horizon() != game.horizon ||
      obs.y.rows() != obs.model.dimension()) {
    throw ConfigError("observation sequence does not match the game");
  }
}

// (h(x) - y) / sqrt(T) over the state block of a decision vector laid out like
// the KKT primal; `dimension` is the full decision length.
std::pair<Vector, SparseMatrix> likelihood_residual(const ObservationSequence& obs,
                                                    const KktLayout& layout, const Vector& z,
                                                    Eigen::Index dimension) {
  const int T = layout.horizon();
  const double scale = 1.0 / std::sqrt(static_cast<double>(T));
  const Matrix states = z.head(layout.states_size()).reshaped(layout.state_dim(), T);
  const Vector r = scale * observation_residuals(obs, states).reshaped();
  const int d = obs.model.dimension();
  const int c = obs.model.channels();
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(d) * T);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < obs.model.players; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        trip.emplace_back(static_cast<Eigen::Index>(t) * d + observation_row(obs.model, i, ch),
                          layout.state(t) + kPlayerStateDim * i + ch, scale);
      }
    }
  }
  SparseMatrix jac(r.size(), dimension);
  jac.setFromTriplets(trip.begin(), trip.end());
  return {r, jac};
}

ConstraintEval dynamics_constraints(const GameDefinition& game, const KktLayout& layout,
                                    const Vector& z, Eigen::Index dimension) {
  const int n = game.state_dim();
  const int m = game.input_dim();
  const int T = game.horizon;
  const Matrix x = z.head(layout.states_size()).reshaped(n, T);
  const Matrix u = z.segment(layout.states_size(), layout.inputs_size()).reshaped(m, T);
  ConstraintEval e;
  e.residual.resize(static_cast<Eigen::Index>(T - 1) * n);
  Triplets trip;
  for (int k = 0; k + 1 < T; ++k) {
    const Eigen::Index row = static_cast<Eigen::Index>(k) * n;
    e.residual.segment(row, n) = x.col(k + 1) - step(game.dynamics, x.col(k), u.col(k), game.dt);
    const StepJacobians d = jacobians(game.dynamics, x.col(k), u.col(k), game.dt);
    for (int r = 0; r < n; ++r) {
      trip.emplace_back(row + r, layout.state(k + 1) + r, 1.0);
      for (int col = 0; col < n; ++col) {
        if (d.state(r, col) != 0.0) trip.emplace_back(row + r, layout.state(k) + col, -d.state(r, col));
      }
      for (int col = 0; col < m; ++col) {
        if (d.input(r, col) != 0.0) trip.emplace_back(row + r, layout.input(k) + col, -d.input(r, col));
      }
    }
  }
  e.jacobian.resize(e.residual.size(), dimension);
  e.jacobian.setFromTriplets(trip.begin(), trip.end());
  return e;
}

SparseMatrix dynamics_curvature(const GameDefinition& game, const KktLayout& layout,
                                const Vector& z, const Vector& weights, Eigen::Index dimension) {
  const int n = game.state_dim();
  Triplets trip;
  for (int k = 0; k + 1 < game.horizon; ++k) {
    const Matrix h = weighted_state_hessian(
        game.dynamics, z.segment(layout.state(k), n),
        weights.segment(static_cast<Eigen::Index>(k) * n, n), game.dt);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) {
        if (h(r, c) != 0.0) trip.emplace_back(layout.state(k) + r, layout.state(k) + c, -h(r, c));
      }
    }
  }
  SparseMatrix m(dimension, dimension);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

void append(Triplets& out, const SparseMatrix& m, Eigen::Index row_offset, Eigen::Index col_offset) {
  for (Eigen::Index col = 0; col < m.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      out.emplace_back(it.row() + row_offset, it.col() + col_offset, it.value());
    }
  }
}

CostParameters uniform_parameters(const CostBasisSet& basis, bool normalized) {
  CostParameters theta;
  theta.normalized = normalized;
  for (int i = 0; i < basis.player_count(); ++i) {
    theta.weights.push_back(Vector::Constant(basis.dimension(i), 1.0 / basis.dimension(i)));
  }
  return theta;
}

// Projection of v onto {sum w = total, w >= lower} by bisection on the shift.
Vector project_simplex(const Vector& v, const Vector& lower, double total) {
  double lo = (v - lower).minCoeff() - total;
  double hi = (v - lower).maxCoeff();
  auto mass = [&](double tau) { return (v.array() - tau).max(lower.array()).sum(); };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > total ? lo : hi) = mid;
  }
  Vector w = (v.array() - 0.5 * (lo + hi)).max(lower.array()).matrix();
  // remove the residual bisection error from the free coordinates
  const double excess = w.sum() - total;
  const Eigen::Index free = (w.array() > lower.array()).count();
  if (free > 0) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w(j) > lower(j)) w(j) -= excess / static_cast<double>(free);
    }
  }
  return w.cwiseMax(lower);
}

EstimationStatus stage2_status(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return EstimationStatus::kConverged;
    case SolveStatus::kMaxIterations:
      return EstimationStatus::kMaxIterations;
    case SolveStatus::kDiverged:
      return EstimationStatus::kStage2Diverged;
  }
  return EstimationStatus::kStage2Diverged;
}

// Shared stage 1 of both estimators. Returns false on divergence.
bool run_stage1(const ObservationSequence& obs, const GameDefinition& game,
                const InverseConfig& config, EstimationResult& result) {
  if (!config.presolve) {
    result.presolve_trajectory = observation_initial_guess(obs, game);
    result.presolve_nll = neg_log_likelihood(obs, result.presolve_trajectory);
    return true;
  }
  try {
    const PresolveResult pre = presolve(obs, game, config);
    result.presolve_trajectory = pre.trajectory;
    result.presolve_nll = pre.nll;
    result.presolve_iterations = pre.solution.iterations;
    return true;
  } catch (const PresolveDiverged& e) {
    result.presolve_trajectory = e.best().trajectory;
    result.presolve_nll = e.best().nll;
    result.presolve_iterations = e.best().solution.iterations;
    result.trajectory = e.best().trajectory;
    result.nll = e.best().nll;
    result.status = EstimationStatus::kPresolveDiverged;
    return false;
  }
}

void finish(const ObservationSequence& obs, const GameDefinition& game, const CostBasisSet& basis,
            EstimationResult& result) {
  result.nll = neg_log_likelihood(obs, result.trajectory);
  result.dynamics_residual = max_abs(dynamics_residual(game, result.trajectory));
  result.trajectory.feasible = result.dynamics_residual <= 1e-6;
  result.kkt_residual =
      max_abs(assemble_kkt(game, basis, result.trajectory, result.theta, KktDerivatives::kNone)
                  .residual);
}

}  // namespace

std::string to_string(EstimationMethod method) {
  return method == EstimationMethod::kJoint ? "joint" : "baseline";
}

EstimationMethod estimation_method_from_string(const std::string& name) {
  if (name == "joint") return EstimationMethod::kJoint;
  if (name == "baseline") return EstimationMethod::kBaseline;
  throw ConfigError("unknown estimation method '" + name + "'");
}

std::string to_string(EstimationStatus status) {
  switch (status) {
    case EstimationStatus::kConverged:
      return "converged";
    case EstimationStatus::kMaxIterations:
      return "max-iterations";
    case EstimationStatus::kPresolveDiverged:
      return "presolve-diverged";
    case EstimationStatus::kStage2Diverged:
      return "stage2-diverged";
  }
  return "unknown";
}

std::string to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::kNone:
      return "";
    case FailureKind::kPresolveDiverged:
      return "presolve-diverged";
    case FailureKind::kStage2Diverged:
      return "stage2-diverged";
    case FailureKind::kForwardIllConditioned:
      return "forward-ill-conditioned";
  }
  return "unknown";
}

FailureKind EstimationResult::failure() const {
  if (status == EstimationStatus::kPresolveDiverged) return FailureKind::kPresolveDiverged;
  if (status == EstimationStatus::kStage2Diverged) return FailureKind::kStage2Diverged;
  return FailureKind::kNone;
}

void InverseConfig::validate(const CostBasisSet& basis) const {
  if (!(control_floor >= 0.0)) throw ConfigError("control floor must be >= 0");
  if (!normalize) return;
  for (int i = 0; i < basis.player_count(); ++i) {
    double floor_mass = 0.0;
    for (const auto& b : basis.players[i]) {
      if (b.is_control_effort()) floor_mass += control_floor;
    }
    if (floor_mass > 1.0) throw ConfigError("control floor leaves the simplex empty");
  }
}

CostParameters project_parameters(const CostParameters& theta, const CostBasisSet& basis,
                                  const InverseConfig& config) {
  const Vector lower = parameter_lower_bounds(basis, config);
  CostParameters out = theta;
  out.normalized = config.normalize;
  for (int i = 0; i < basis.player_count(); ++i) {
    const Vector lo = lower.segment(basis.offset(i), basis.dimension(i));
    out.weights[i] = config.normalize ? project_simplex(theta.weights[i], lo, 1.0)
                                      : Vector(theta.weights[i].cwiseMax(lo));
  }
  return out;
}

Trajectory observation_initial_guess(const ObservationSequence& obs, const GameDefinition& game) {
  check_observations(obs, game);
  const int T = game.horizon;
  const double dt = game.dt;
  const bool unicycle = game.dynamics == DynamicsKind::kUnicycle;
  Trajectory traj;
  traj.states = Matrix::Zero(game.state_dim(), T);
  traj.inputs = Matrix::Zero(game.input_dim(), T);
  for (int i = 0; i < game.players; ++i) {
    const int s = kPlayerStateDim * i;
    for (int ch = 0; ch < kPlayerStateDim; ++ch) {
      const int row = observation_row(obs.model, i, ch);
      if (row >= 0) traj.states.row(s + ch) = obs.y.row(row);
    }
    if (unicycle) {
      for (int t = 1; t < T; ++t) {
        traj.states(s + 2, t) =
            traj.states(s + 2, t - 1) + wrap_angle(obs.y(observation_row(obs.model, i, 2), t) -
                                                   obs.y(observation_row(obs.model, i, 2), t - 1));
      }
    }
    if (observation_row(obs.model, i, 3) < 0) {
      for (int t = 0; t < T; ++t) {
        const int a = std::min(t, T - 2);
        const Eigen::Vector2d dp =
            (traj.states.block<2, 1>(s, a + 1) - traj.states.block<2, 1>(s, a)) / dt;
        traj.states(s + 3, t) =
            unicycle ? dp.dot(Eigen::Vector2d(std::cos(traj.states(s + 2, t)),
                                              std::sin(traj.states(s + 2, t))))
                     : dp.y();
      }
    }
    for (int t = 0; t + 1 < T; ++t) {
      if (unicycle) {
        traj.inputs(kPlayerInputDim * i, t) = (traj.states(s + 2, t + 1) - traj.states(s + 2, t)) / dt;
        traj.inputs(kPlayerInputDim * i + 1, t) = (traj.states(s + 3, t + 1) - traj.states(s + 3, t)) / dt;
      } else {
        traj.inputs.block<2, 1>(kPlayerInputDim * i, t) =
            (traj.states.block<2, 1>(s + 2, t + 1) - traj.states.block<2, 1>(s + 2, t)) / dt;
      }
    }
  }
  return traj;
}

PresolveResult presolve(const ObservationSequence& obs, const GameDefinition& game,
                        const InverseConfig& config) {
  check_observations(obs, game);
  const KktLayout layout(game);
  const Eigen::Index dim = layout.states_size() + layout.inputs_size();

  NlpProblem problem;
  problem.dimension = static_cast<int>(dim);
  problem.objective = least_squares_objective(
      [&](const Vector& z) { return likelihood_residual(obs, layout, z, dim); });
  problem.constraints = [&](const Vector& z) { return dynamics_constraints(game, layout, z, dim); };
  problem.constraint_curvature = [&](const Vector& z, const Vector& w) {
    return dynamics_curvature(game, layout, z, w, dim);
  };
  problem.lower = Vector::Constant(dim, -kInf);
  problem.upper = Vector::Constant(dim, kInf);

  const Vector init = pack_primal(layout, observation_initial_guess(obs, game)).head(dim);
  PresolveResult out;
  out.solution = solve(problem, init, config.presolve_solver);
  Vector primal = Vector::Zero(layout.primal_size());
  primal.head(dim) = out.solution.z;
  out.trajectory = unpack_primal(layout, primal);
  out.trajectory.costates.clear();
  out.trajectory.feasible = max_abs(dynamics_residual(game, out.trajectory)) <= 1e-6;
  out.nll = neg_log_likelihood(obs, out.trajectory);
  if (out.solution.status == SolveStatus::kDiverged) {
    throw PresolveDiverged("pre-solve diverged", std::move(out));
  }
  return out;
}

EstimationResult solve_inverse_joint(const ObservationSequence& obs, const GameDefinition& game,
                                     const CostBasisSet& basis, const InverseConfig& config) {
  check_observations(obs, game);
  config.validate(basis);
  EstimationResult result;
  result.method = EstimationMethod::kJoint;
  result.theta = uniform_parameters(basis, config.normalize);
  if (!run_stage1(obs, game, config, result)) return result;

  const KktLayout layout(game);
  const Eigen::Index primal_size = layout.primal_size();
  const Eigen::Index k = basis.total_dimension();
  const Eigen::Index dim = primal_size + k;
  const int players = game.players;
  auto theta_of = [&](const Vector& z) {
    return CostParameters::unflatten(z.tail(k), basis, config.normalize);
  };

  NlpProblem problem;
  problem.dimension = static_cast<int>(dim);
  problem.objective = least_squares_objective(
      [&](const Vector& z) { return likelihood_residual(obs, layout, z, dim); });
  problem.constraints = [&](const Vector& z) {
    const KktSystem sys = assemble_kkt(game, basis, unpack_primal(layout, z.head(primal_size)),
                                       theta_of(z), KktDerivatives::kAll);
    const Eigen::Index rows = sys.residual.size();
    const Eigen::Index simplex = config.normalize ? players : 0;
    ConstraintEval e;
    e.residual.resize(rows + simplex);
    e.residual.head(rows) = sys.residual;
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(sys.jacobian.nonZeros() + sys.parameter_jacobian.nonZeros() + k));
    append(trip, sys.jacobian, 0, 0);
    append(trip, sys.parameter_jacobian, 0, primal_size);
    for (Eigen::Index i = 0; i < simplex; ++i) {
      const int p = static_cast<int>(i);
      e.residual(rows + i) = z.segment(primal_size + basis.offset(p), basis.dimension(p)).sum() - 1.0;
      for (int j = 0; j < basis.dimension(p); ++j) {
        trip.emplace_back(rows + i, primal_size + basis.offset(p) + j, 1.0);
      }
    }
    e.jacobian.resize(e.residual.size(), dim);
    e.jacobian.setFromTriplets(trip.begin(), trip.end());
    return e;
  };
  problem.lower = Vector::Constant(dim, -kInf);
  problem.upper = Vector::Constant(dim, kInf);
  problem.lower.tail(k) = parameter_lower_bounds(basis, config);

  Trajectory start = result.presolve_trajectory;
  start.costates = fit_costates(game, basis, start, result.theta);
  Vector init(dim);
  init.head(primal_size) = pack_primal(layout, start);
  init.tail(k) = result.theta.flatten();

  const NlpSolution sol = solve(problem, init, config.stage2_solver);
  result.iterations = sol.iterations;
  result.status = stage2_status(sol.status);
  result.trajectory = unpack_primal(layout, sol.z.head(primal_size));
  result.theta = project_parameters(theta_of(sol.z), basis, config);
  finish(obs, game, basis, result);
  if (result.converged() && (result.kkt_residual > config.stage2_solver.tol_feas ||
                             result.dynamics_residual > config.stage2_solver.tol_feas)) {
    result.status = EstimationStatus::kMaxIterations;
  }
  return result;
}

EstimationResult solve_inverse_baseline(const ObservationSequence& obs, const GameDefinition& game,
                                        const CostBasisSet& basis, const InverseConfig& config) {
  check_observations(obs, game);
  config.validate(basis);
  EstimationResult result;
  result.method = EstimationMethod::kBaseline;
  result.theta = uniform_parameters(basis, config.normalize);
  if (!run_stage1(obs, game, config, result)) return result;

  // Stationarity is linear in (lambda, theta) at a fixed trajectory: s = A z.
  Trajectory fixed = result.presolve_trajectory;
  fixed.costates.clear();
  const KktSystem sys = assemble_kkt(game, basis, fixed, result.theta, KktDerivatives::kAll);
  const KktLayout& layout = sys.layout;
  const Eigen::Index rows = layout.stationarity_size();
  const Eigen::Index c = layout.costates_size();
  const Eigen::Index k = basis.total_dimension();
  const Eigen::Index dim = c + k;
  Triplets trip;
  append(trip, SparseMatrix(SparseMatrix(sys.jacobian.rightCols(c)).topRows(rows)), 0, 0);
  append(trip, SparseMatrix(sys.parameter_jacobian.topRows(rows)), 0, c);
  SparseMatrix a(rows, dim);
  a.setFromTriplets(trip.begin(), trip.end());

  NlpProblem problem;
  problem.dimension = static_cast<int>(dim);
  problem.objective = least_squares_objective(
      [&a](const Vector& z) { return std::pair<Vector, SparseMatrix>{a * z, a}; });
  if (config.normalize) {
    SparseMatrix sums(game.players, dim);
    Triplets st;
    for (int i = 0; i < game.players; ++i) {
      for (int j = 0; j < basis.dimension(i); ++j) st.emplace_back(i, c + basis.offset(i) + j, 1.0);
    }
    sums.setFromTriplets(st.begin(), st.end());
    problem.constraints = [sums](const Vector& z) {
      return ConstraintEval{sums * z - Vector::Ones(sums.rows()), sums};
    };
  }
  problem.lower = Vector::Constant(dim, -kInf);
  problem.upper = Vector::Constant(dim, kInf);
  problem.lower.tail(k) = parameter_lower_bounds(basis, config);

  Vector init(dim);
  init.head(c) = pack_primal(layout, Trajectory{fixed.states, fixed.inputs,
                                                fit_costates(game, basis, fixed, result.theta)})
                     .tail(c);
  init.tail(k) = result.theta.flatten();

  const NlpSolution sol = solve(problem, init, config.stage2_solver);
  result.iterations = sol.iterations;
  result.status = stage2_status(sol.status);
  result.theta = project_parameters(
      CostParameters::unflatten(sol.z.tail(k), basis, config.normalize), basis, config);
  result.trajectory = fixed;
  result.trajectory.costates = fit_costates(game, basis, fixed, result.theta);
  finish(obs, game, basis, result);
  return result;
}

EstimationResult solve_inverse(EstimationMethod method, const ObservationSequence& obs,
                               const GameDefinition& game, const CostBasisSet& basis,
                               const InverseConfig& config) {
  return method == EstimationMethod::kJoint ? solve_inverse_joint(obs, game, basis, config)
                                            : solve_inverse_baseline(obs, game, basis, config);
}

ForwardSolution predict(const CostParameters& theta, const GameDefinition& game,
                        const CostBasisSet& basis, const std::optional<Trajectory>& estimate) {
  std::optional<Trajectory> extra;
  if (estimate) {
    extra = *estimate;
    extra->costates.clear();
  }
  return solve_forward(game, basis, theta, extra);
}

}  // namespace invgame
