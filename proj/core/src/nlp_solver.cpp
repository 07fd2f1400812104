#include "invgame/nlp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

namespace invgame {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  bool finite = false;
  ObjectiveEval objective;
  ConstraintEval constraints;
  double merit = kInf;
};

bool all_finite(const Vector& v) { return v.allFinite(); }

bool all_finite(const SparseMatrix& m) {
  for (Eigen::Index i = 0; i < m.nonZeros(); ++i) {
    if (!std::isfinite(m.valuePtr()[i])) return false;
  }
  return true;
}

Vector project(const Vector& z, const Vector& lower, const Vector& upper) {
  return z.cwiseMax(lower).cwiseMin(upper);
}

class AugmentedLagrangian {
 public:
  explicit AugmentedLagrangian(const NlpProblem& problem) : problem_(problem) {}

  bool constrained() const { return static_cast<bool>(problem_.constraints); }

  Evaluation evaluate(const Vector& z, const Vector& y, double rho) const {
    Evaluation e;
    e.objective = problem_.objective(z);
    if (!std::isfinite(e.objective.value) || !all_finite(e.objective.gradient) ||
        !all_finite(e.objective.hessian)) {
      return e;
    }
    if (constrained()) {
      e.constraints = problem_.constraints(z);
      if (!all_finite(e.constraints.residual) || !all_finite(e.constraints.jacobian)) return e;
    }
    e.merit = e.objective.value;
    if (constrained()) {
      const Vector& c = e.constraints.residual;
      if (y.size() == c.size()) e.merit += y.dot(c);
      e.merit += 0.5 * rho * c.squaredNorm();
    }
    e.finite = std::isfinite(e.merit);
    return e;
  }

  Vector gradient(const Evaluation& e, const Vector& y, double rho) const {
    Vector g = e.objective.gradient;
    if (constrained()) {
      g += e.constraints.jacobian.transpose() * (y + rho * e.constraints.residual);
    }
    return g;
  }

  SparseMatrix model_hessian(const Vector& z, const Evaluation& e, const Vector& y,
                             double rho) const {
    SparseMatrix b = e.objective.hessian;
    if (b.rows() == 0) b.resize(problem_.dimension, problem_.dimension);
    if (constrained()) {
      const SparseMatrix& j = e.constraints.jacobian;
      b += rho * SparseMatrix(j.transpose() * j);
      if (problem_.constraint_curvature) {
        b += problem_.constraint_curvature(z, y + rho * e.constraints.residual);
      }
    }
    return b;
  }

  double projected_gradient_norm(const Vector& z, const Vector& g) const {
    return max_abs(z - project(z - g, problem_.lower, problem_.upper));
  }

 private:
  const NlpProblem& problem_;
};

// Freezes variables at an active bound and adds the Marquardt diagonal.
SparseMatrix damped_system(const SparseMatrix& model, const std::vector<bool>& frozen,
                           const Vector& scale, double mu) {
  const Eigen::Index dim = model.rows();
  SparseMatrix diag(dim, dim);
  diag.reserve(Eigen::VectorXi::Constant(dim, 1));
  for (Eigen::Index i = 0; i < dim; ++i) diag.insert(i, i) = frozen[i] ? 0.0 : mu * scale(i);
  SparseMatrix m = model + diag;
  for (Eigen::Index col = 0; col < m.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      if (frozen[it.row()] || frozen[it.col()]) it.valueRef() = it.row() == it.col() ? 1.0 : 0.0;
    }
  }
  return m;
}

struct InnerResult {
  bool diverged = false;
  int iterations = 0;
};

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max-iterations";
    case SolveStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

void NlpProblem::validate() const {
  if (dimension <= 0) throw ConfigError("problem dimension must be positive");
  if (!objective) throw ConfigError("problem has no objective");
  if (lower.size() != dimension || upper.size() != dimension) {
    throw ConfigError("bound vectors must match the decision dimension");
  }
  if ((lower.array() > upper.array()).any()) throw ConfigError("lower bound exceeds upper bound");
}

std::function<ObjectiveEval(const Vector&)> least_squares_objective(
    std::function<std::pair<Vector, SparseMatrix>(const Vector&)> residual) {
  return [residual = std::move(residual)](const Vector& z) {
    auto [r, j] = residual(z);
    ObjectiveEval e;
    e.value = r.squaredNorm();
    e.gradient = 2.0 * (j.transpose() * r);
    e.hessian = 2.0 * SparseMatrix(j.transpose() * j);
    return e;
  };
}

NlpSolution solve(const NlpProblem& problem, const Vector& init, const SolverConfig& config) {
  problem.validate();
  if (init.size() != problem.dimension) throw ConfigError("initial point has wrong dimension");

  const AugmentedLagrangian al(problem);
  NlpSolution sol;
  sol.z = project(init, problem.lower, problem.upper);

  double rho = config.initial_penalty;
  Evaluation current = al.evaluate(sol.z, Vector(), 0.0);
  if (!current.finite) {
    sol.status = SolveStatus::kDiverged;
    return sol;
  }
  const Eigen::Index constraint_count =
      al.constrained() ? current.constraints.residual.size() : Eigen::Index{0};
  Vector y = Vector::Zero(constraint_count);
  if (constraint_count > 0) {
    // least-squares multiplier estimate: min_y ||grad f + J^T y||
    const SparseMatrix& j = current.constraints.jacobian;
    SparseMatrix jjt = j * j.transpose();
    SparseMatrix ridge(constraint_count, constraint_count);
    ridge.setIdentity();
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(jjt + 1e-10 * ridge);
    if (ldlt.info() == Eigen::Success) {
      const Vector estimate = ldlt.solve(-(j * current.objective.gradient));
      if (estimate.allFinite()) y = estimate;
    }
  }
  double previous_feasibility =
      al.constrained() ? max_abs(current.constraints.residual) : 0.0;
  double inner_tol = al.constrained() ? std::max(config.tol_opt, 1e-2) : config.tol_opt;

  auto inner_solve = [&](Vector& z) {
    InnerResult result;
    Evaluation cur = al.evaluate(z, y, rho);
    if (!cur.finite) {
      result.diverged = true;
      return result;
    }
    double mu = 1e-4;
    double nu = 2.0;
    for (int it = 0; it < config.max_inner; ++it) {
      const Vector g = al.gradient(cur, y, rho);
      if (al.projected_gradient_norm(z, g) <= inner_tol) break;
      ++result.iterations;

      std::vector<bool> frozen(static_cast<std::size_t>(problem.dimension), false);
      for (Eigen::Index i = 0; i < problem.dimension; ++i) {
        frozen[i] = (z(i) <= problem.lower(i) && g(i) > 0.0) ||
                    (z(i) >= problem.upper(i) && g(i) < 0.0);
      }
      const SparseMatrix model = al.model_hessian(z, cur, y, rho);
      const Vector scale = model.diagonal().cwiseAbs().cwiseMax(1e-8);
      Vector rhs = -g;
      for (Eigen::Index i = 0; i < problem.dimension; ++i) {
        if (frozen[i]) rhs(i) = 0.0;
      }

      bool accepted = false;
      while (!accepted && mu < 1e20) {
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(damped_system(model, frozen, scale, mu));
        if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
          mu *= nu;
          nu *= 2.0;
          continue;
        }
        const Vector delta = ldlt.solve(rhs);
        if (!delta.allFinite()) {
          mu *= nu;
          nu *= 2.0;
          continue;
        }

        // Non-finite guard: halve the step up to three times.
        Vector trial_z;
        Evaluation trial;
        double fraction = 1.0;
        int failures = 0;
        for (; failures < 3; ++failures, fraction *= 0.5) {
          trial_z = project(z + fraction * delta, problem.lower, problem.upper);
          trial = al.evaluate(trial_z, y, rho);
          if (trial.finite) break;
        }
        if (failures == 3) {
          result.diverged = true;
          return result;
        }

        const Vector s = trial_z - z;
        const double predicted = -(g.dot(s) + 0.5 * s.dot(model * s));
        const double actual = cur.merit - trial.merit;
        const double ratio = predicted > 0.0 ? actual / predicted : -1.0;
        // Below round-off in the merit value, fall back to projected-gradient decrease.
        const double noise = 100.0 * std::numeric_limits<double>::epsilon() *
                             (1.0 + std::abs(cur.merit));
        const bool in_noise = predicted > 0.0 && predicted <= noise && std::abs(actual) <= noise;
        const bool acceptable =
            in_noise ? al.projected_gradient_norm(trial_z, al.gradient(trial, y, rho)) <
                           al.projected_gradient_norm(z, g)
                     : ratio > 1e-4;
        if (acceptable) {
          z = trial_z;
          cur = std::move(trial);
          mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * ratio - 1.0, 3));
          mu = std::max(mu, 1e-12);
          nu = 2.0;
          accepted = true;
        } else {
          mu *= nu;
          nu *= 2.0;
        }
      }
      if (!accepted) break;  // stalled
    }
    return result;
  };

  for (int outer = 0; outer < config.max_outer; ++outer) {
    ++sol.outer_iterations;
    const InnerResult inner = inner_solve(sol.z);
    sol.iterations += inner.iterations;
    if (inner.diverged) {
      sol.status = SolveStatus::kDiverged;
      break;
    }
    current = al.evaluate(sol.z, y, rho);
    if (!current.finite) {
      sol.status = SolveStatus::kDiverged;
      break;
    }
    sol.objective = current.objective.value;
    if (!al.constrained()) {
      sol.feasibility = 0.0;
      sol.stationarity = al.projected_gradient_norm(sol.z, current.objective.gradient);
      sol.status = sol.stationarity <= config.tol_opt ? SolveStatus::kConverged
                                                      : SolveStatus::kMaxIterations;
      break;
    }
    const Vector& c = current.constraints.residual;
    sol.feasibility = max_abs(c);
    y += rho * c;
    sol.stationarity = al.projected_gradient_norm(
        sol.z, current.objective.gradient + current.constraints.jacobian.transpose() * y);
    if (sol.feasibility <= config.tol_feas && sol.stationarity <= config.tol_opt) {
      sol.status = SolveStatus::kConverged;
      break;
    }
    if (sol.feasibility > config.tol_feas &&
        sol.feasibility > previous_feasibility / config.required_feasibility_ratio) {
      rho = std::min(rho * config.penalty_growth, config.max_penalty);
    }
    previous_feasibility = sol.feasibility;
    inner_tol = std::max(config.tol_opt, 0.1 * inner_tol);
    sol.status = SolveStatus::kMaxIterations;
  }
  sol.multipliers = y;
  return sol;
}

double check_gradient(const VectorFunction& fn, const Vector& point) {
  const auto [value, analytic] = fn(point);
  double worst = 0.0;
  Vector z = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(point(i)));
    z(i) = point(i) + h;
    const Vector plus = fn(z).first;
    z(i) = point(i) - h;
    const Vector minus = fn(z).first;
    z(i) = point(i);
    const Vector fd = (plus - minus) / (2.0 * h);
    for (Eigen::Index r = 0; r < fd.size(); ++r) {
      const double err = std::abs(analytic(r, i) - fd(r)) / std::max(1.0, std::abs(fd(r)));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double check_gradient(const std::function<std::pair<double, Vector>(const Vector&)>& fn,
                      const Vector& point) {
  return check_gradient(
      [&fn](const Vector& z) {
        auto [v, g] = fn(z);
        return std::pair<Vector, Matrix>{Vector::Constant(1, v), g.transpose()};
      },
      point);
}

}  // namespace invgame
