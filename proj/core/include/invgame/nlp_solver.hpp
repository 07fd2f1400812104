#pragma once

#include <functional>
#include <string>

#include "invgame/types.hpp"

namespace invgame {

struct ObjectiveEval {
  double value = 0.0;
  Vector gradient;
  /// Symmetric (Gauss-Newton or exact) Hessian model, both triangles stored.
  SparseMatrix hessian;
};

struct ConstraintEval {
  Vector residual;
  SparseMatrix jacobian;  // constraints x decision dimension
};

/// min f(z) s.t. c(z) = 0, lower <= z <= upper.
///
/// `constraint_curvature(z, w)` optionally returns sum_k w_k * Hess c_k(z). When
/// it is absent the inner solve treats the constraints in Gauss-Newton fashion.
struct NlpProblem {
  int dimension = 0;
  std::function<ObjectiveEval(const Vector&)> objective;
  std::function<ConstraintEval(const Vector&)> constraints;
  std::function<SparseMatrix(const Vector&, const Vector&)> constraint_curvature;
  Vector lower;
  Vector upper;

  /// Throws ConfigError if bounds or callbacks are missing or inconsistent.
  void validate() const;
};

/// Least-squares objective ||r(z)||^2 with Gauss-Newton Hessian 2 J^T J.
std::function<ObjectiveEval(const Vector&)> least_squares_objective(
    std::function<std::pair<Vector, SparseMatrix>(const Vector&)> residual);

struct SolverConfig {
  double tol_feas = 1e-6;
  double tol_opt = 1e-6;
  int max_outer = 50;
  int max_inner = 200;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  /// Penalty grows unless feasibility improves by at least this factor.
  double required_feasibility_ratio = 4.0;
  double max_penalty = 1e12;
};

enum class SolveStatus { kConverged, kMaxIterations, kDiverged };

std::string to_string(SolveStatus status);

struct NlpSolution {
  Vector z;
  Vector multipliers;
  double objective = 0.0;
  double feasibility = 0.0;   // ||c(z)||_inf
  double stationarity = 0.0;  // ||P(grad f + J^T y)||_inf
  SolveStatus status = SolveStatus::kMaxIterations;
  int iterations = 0;  // inner iterations over all outer rounds
  int outer_iterations = 0;
};

/// Augmented Lagrangian outer loop with Levenberg-Marquardt damped Newton inner
/// solves. Bounds are enforced by projection; variables held at an active bound
/// are frozen for the step. Deterministic for fixed inputs.
NlpSolution solve(const NlpProblem& problem, const Vector& init, const SolverConfig& config = {});

using VectorFunction = std::function<std::pair<Vector, Matrix>(const Vector&)>;

/// Largest entrywise |J_analytic - J_fd| / max(1, |J_fd|) with central differences
/// of step 1e-6 * max(1, |z_i|).
double check_gradient(const VectorFunction& fn, const Vector& point);

/// Scalar variant comparing the gradient of a (value, gradient) callback.
double check_gradient(const std::function<std::pair<double, Vector>(const Vector&)>& fn,
                      const Vector& point);

}  // namespace invgame
