#pragma once

#include <optional>
#include <string>
#include <vector>

#include "invgame/nlp_solver.hpp"
#include "invgame/objectives.hpp"

namespace invgame {

/// Index map of the stacked open-loop Nash KKT system.
///
/// Primal vector: [x_0 .. x_{T-1} | u_0 .. u_{T-1} | lambda^0 .. lambda^{N-1}] where
/// u_k stacks every player's input and lambda^i = (lambda^i_0 .. lambda^i_{T-2}).
///
/// Residual: for each player i, state stationarity for k = 1..T-1 (x_0 is the
/// fixed initial condition) followed by input stationarity for k = 0..T-1; then
/// the shared dynamics block for k = 0..T-2.
class KktLayout {
 public:
  KktLayout() = default;
  explicit KktLayout(const GameDefinition& game);

  Eigen::Index state(int k) const { return static_cast<Eigen::Index>(k) * n_; }
  Eigen::Index input(int k, int player = 0) const {
    return static_cast<Eigen::Index>(T_) * n_ + static_cast<Eigen::Index>(k) * m_ +
           kPlayerInputDim * player;
  }
  Eigen::Index costate(int player, int k) const {
    return static_cast<Eigen::Index>(T_) * (n_ + m_) +
           (static_cast<Eigen::Index>(player) * (T_ - 1) + k) * n_;
  }
  Eigen::Index states_size() const { return static_cast<Eigen::Index>(T_) * n_; }
  Eigen::Index inputs_size() const { return static_cast<Eigen::Index>(T_) * m_; }
  Eigen::Index costates_size() const { return static_cast<Eigen::Index>(N_) * (T_ - 1) * n_; }
  Eigen::Index primal_size() const { return states_size() + inputs_size() + costates_size(); }

  Eigen::Index player_block_size() const {
    return static_cast<Eigen::Index>(T_ - 1) * n_ + static_cast<Eigen::Index>(T_) * kPlayerInputDim;
  }
  /// k in [1, T-1]
  Eigen::Index state_stationarity(int player, int k) const {
    return player * player_block_size() + static_cast<Eigen::Index>(k - 1) * n_;
  }
  Eigen::Index input_stationarity(int player, int k) const {
    return player * player_block_size() + static_cast<Eigen::Index>(T_ - 1) * n_ +
           static_cast<Eigen::Index>(k) * kPlayerInputDim;
  }
  Eigen::Index stationarity_size() const { return N_ * player_block_size(); }
  Eigen::Index dynamics(int k) const {
    return stationarity_size() + static_cast<Eigen::Index>(k) * n_;
  }
  Eigen::Index residual_size() const {
    return stationarity_size() + static_cast<Eigen::Index>(T_ - 1) * n_;
  }

  /// Time-staged orderings for factorizing the Jacobian with x_0 removed: stage k
  /// pairs input stationarity with u_k, dynamics k with x_{k+1}, and state
  /// stationarity at k+1 with lambda_k. Entry j is the original index (unknowns
  /// are offset by -state_dim()) placed at position j.
  std::vector<Eigen::Index> staged_unknowns() const;
  std::vector<Eigen::Index> staged_residuals() const;

  int players() const { return N_; }
  int horizon() const { return T_; }
  int state_dim() const { return n_; }
  int input_dim() const { return m_; }

 private:
  int N_ = 0;
  int T_ = 0;
  int n_ = 0;
  int m_ = 0;
};

struct KktSystem {
  KktLayout layout;
  Vector residual;
  SparseMatrix jacobian;            // d residual / d primal
  SparseMatrix parameter_jacobian;  // d residual / d flattened theta
  bool clamped = false;
};

enum class KktDerivatives { kNone, kPrimal, kAll };

/// Primal vector <-> trajectory conversion. Missing costates pack as zeros.
Vector pack_primal(const KktLayout& layout, const Trajectory& traj);
Trajectory unpack_primal(const KktLayout& layout, const Vector& primal);

/// Stacked KKT residual G(x, u, lambda; theta) and (optionally) its Jacobians.
/// Uses traj.costates, or zeros when the trajectory carries none.
KktSystem assemble_kkt(const GameDefinition& game, const CostBasisSet& basis,
                       const Trajectory& traj, const CostParameters& theta,
                       KktDerivatives derivatives = KktDerivatives::kAll);

/// Costates minimizing the stationarity residual at a fixed (x, u, theta); a
/// linear least-squares problem with full column rank.
std::vector<Matrix> fit_costates(const GameDefinition& game, const CostBasisSet& basis,
                                 const Trajectory& traj, const CostParameters& theta);

enum class ForwardStatus { kConverged, kMaxIterations, kIllConditioned };

std::string to_string(ForwardStatus status);

struct ForwardSolution {
  Trajectory trajectory;  // carries costates
  double residual_norm = 0.0;
  double dynamics_residual_norm = 0.0;
  ForwardStatus status = ForwardStatus::kMaxIterations;
  int iterations = 0;
  std::string method;

  bool converged() const { return status == ForwardStatus::kConverged; }
};

struct NewtonOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
  double armijo = 1e-4;
  double initial_regularization = 1e-8;
  double regularization_growth = 10.0;
  double max_regularization = 1e-2;
};

struct IbrOptions {
  int max_sweeps = 100;
  double input_tolerance = 1e-6;
  double kkt_tolerance = 1e-6;
  SolverConfig inner{1e-10, 1e-9, 1, 200, 10.0, 10.0, 4.0, 1e12};
};

/// Damped Newton on G = 0 from `init` with x_0 pinned to the game's initial state.
ForwardSolution solve_olne_newton(const GameDefinition& game, const CostBasisSet& basis,
                                  const CostParameters& theta, const Trajectory& init,
                                  const NewtonOptions& options = {});

/// Gauss-Seidel iterated best response; each player's optimal-control problem
/// is solved by the NLP solver with the opponents' inputs frozen.
ForwardSolution solve_olne_ibr(const GameDefinition& game, const CostBasisSet& basis,
                               const CostParameters& theta, const Trajectory& init,
                               const IbrOptions& options = {});

/// d/dalpha J^i(u^i + alpha * direction, u^{-i}; x_1) at alpha = 0 through rollout.
/// `direction` is 2 x T.
double unilateral_deviation_check(const GameDefinition& game, const CostBasisSet& basis,
                                  const CostParameters& theta, const Trajectory& solution,
                                  int player, const Matrix& direction);

Trajectory zero_input_initialization(const GameDefinition& game);

/// Each player drives straight at constant speed toward its goal, or along its
/// reference lane at the reference speed; not dynamically feasible in general.
Trajectory straight_line_initialization(const GameDefinition& game, const CostBasisSet& basis);

/// Forward solve with deterministic fallbacks: from each initialization
/// (zero-input rollout, straight-line heuristic, `extra_init`) IBR followed by a
/// Newton polish, then Newton alone. Ill-conditioned when every attempt fails.
ForwardSolution solve_forward(const GameDefinition& game, const CostBasisSet& basis,
                              const CostParameters& theta,
                              const std::optional<Trajectory>& extra_init = std::nullopt,
                              const IbrOptions& ibr = {}, const NewtonOptions& newton = {});

}  // namespace invgame
