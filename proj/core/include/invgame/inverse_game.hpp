#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "invgame/forward_game.hpp"
#include "invgame/observation.hpp"

namespace invgame {

enum class EstimationMethod { kJoint, kBaseline };

std::string to_string(EstimationMethod method);
EstimationMethod estimation_method_from_string(const std::string& name);

struct InverseConfig {
  /// Per-player simplex constraint sum_j w_j = 1.
  bool normalize = true;
  /// Lower bound on control-effort weights; all other weights are >= 0.
  double control_floor = kDefaultControlFloor;
  /// Without the pre-solve, stage 2 starts from the raw observation-based guess.
  bool presolve = true;
  SolverConfig presolve_solver{1e-8, 1e-8, 50, 200, 10.0, 10.0, 4.0, 1e12};
  /// A small initial penalty lets (theta, lambda) absorb the KKT violation before
  /// the trajectory is pulled away from the data.
  SolverConfig stage2_solver{1e-6, 1e-6, 50, 200, 0.01, 10.0, 4.0, 1e12};

  /// Throws ConfigError on a negative floor or a floor that makes the simplex empty.
  void validate(const CostBasisSet& basis) const;
};

enum class EstimationStatus { kConverged, kMaxIterations, kPresolveDiverged, kStage2Diverged };

std::string to_string(EstimationStatus status);

/// Failure classes used by the experiment accounting. Only
/// kForwardIllConditioned corresponds to an "ill-conditioned forward game".
enum class FailureKind { kNone, kPresolveDiverged, kStage2Diverged, kForwardIllConditioned };

std::string to_string(FailureKind kind);

struct EstimationResult {
  EstimationMethod method = EstimationMethod::kJoint;
  CostParameters theta;
  Trajectory trajectory;           // recovered (x, u, lambda)
  Trajectory presolve_trajectory;  // stage-1 artifact, kept on failure
  double nll = 0.0;                // at `trajectory`
  double presolve_nll = 0.0;
  double kkt_residual = 0.0;       // ||G(x, u, lambda; theta)||_inf
  double dynamics_residual = 0.0;  // ||F(x, u)||_inf
  EstimationStatus status = EstimationStatus::kMaxIterations;
  int iterations = 0;
  int presolve_iterations = 0;

  bool converged() const { return status == EstimationStatus::kConverged; }
  /// kPresolveDiverged / kStage2Diverged from the status, otherwise kNone.
  FailureKind failure() const;
};

struct PresolveResult {
  Trajectory trajectory;  // flagged feasible when ||F||_inf <= 1e-6
  double nll = 0.0;
  NlpSolution solution;
};

/// Thrown by `presolve` when the solver diverges; carries the best iterate.
class PresolveDiverged : public std::runtime_error {
 public:
  PresolveDiverged(const std::string& what, PresolveResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const PresolveResult& best() const { return best_; }

 private:
  PresolveResult best_;
};

/// Trajectory read directly off the observations: positions and headings as
/// observed (headings unwrapped), unobserved channels and inputs by finite
/// differences. Generally infeasible.
Trajectory observation_initial_guess(const ObservationSequence& obs, const GameDefinition& game);

/// Maximum-likelihood (x, u) subject only to the dynamics. The likelihood is
/// scaled by 1/T. x_1 is estimated like every other state.
PresolveResult presolve(const ObservationSequence& obs, const GameDefinition& game,
                        const InverseConfig& config = {});

/// Joint estimate over (theta, x, u, lambda): minimize NLL/T subject to the
/// stacked KKT conditions and the parameter constraints, initialized from the
/// pre-solve with uniform weights and least-squares costates.
EstimationResult solve_inverse_joint(const ObservationSequence& obs, const GameDefinition& game,
                                     const CostBasisSet& basis, const InverseConfig& config = {});

/// KKT-residual baseline: fix (x, u) at the pre-solve and minimize ||G||^2 over
/// (theta, lambda) under the same parameter constraints.
EstimationResult solve_inverse_baseline(const ObservationSequence& obs, const GameDefinition& game,
                                        const CostBasisSet& basis,
                                        const InverseConfig& config = {});

EstimationResult solve_inverse(EstimationMethod method, const ObservationSequence& obs,
                               const GameDefinition& game, const CostBasisSet& basis,
                               const InverseConfig& config = {});

/// Forward solve at the estimated weights from the game's (true) initial state.
/// `estimate` (typically the truth-free recovered trajectory) is offered to the
/// forward solver as an extra initialization.
ForwardSolution predict(const CostParameters& theta, const GameDefinition& game,
                        const CostBasisSet& basis,
                        const std::optional<Trajectory>& estimate = std::nullopt);

/// Euclidean projection of each player's weights onto {sum w = 1, w >= lower}
/// (or only the bounds when `normalize` is false).
CostParameters project_parameters(const CostParameters& theta, const CostBasisSet& basis,
                                  const InverseConfig& config);

}  // namespace invgame
