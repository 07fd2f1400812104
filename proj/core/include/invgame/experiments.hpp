#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "invgame/inverse_game.hpp"
#include "invgame/scenarios.hpp"

namespace invgame {

/// 1 - (1/N) sum_i cos(theta_true^i, theta_est^i). Throws DomainError when a
/// per-player vector has zero norm, ConfigError on shape mismatch.
double cosine_error(const CostParameters& truth, const CostParameters& estimate);

/// Mean over players and steps of the Euclidean position distance.
double position_error(const Trajectory& predicted, const Trajectory& truth);

/// `levels` evenly spaced values on [0, max], both ends included.
std::vector<double> sigma_grid(int levels, double max = 0.252);

/// Noise seed of one sweep cell; shared across sigma levels, observation kinds
/// and methods so that cells differ only in the quantity being varied.
std::uint64_t cell_seed(std::uint64_t master_seed, int seed_index);

struct MonteCarloConfig {
  std::vector<std::string> scenarios{kTwoPlayerCrossing};
  int seeds = 10;
  std::vector<double> sigmas = sigma_grid(5, 0.2);
  std::vector<ObservationKind> kinds{ObservationKind::kFull, ObservationKind::kPartial};
  std::vector<EstimationMethod> methods{EstimationMethod::kJoint, EstimationMethod::kBaseline};
  std::uint64_t master_seed = 0;
  int workers = 0;  // 0: hardware concurrency
  InverseConfig inverse;

  /// "desk": 10 seeds x {0, 0.05, .., 0.2}; "full": 40 seeds x 22 levels on [0, 0.252].
  static MonteCarloConfig profile(const std::string& name);

  /// Throws ConfigError for an empty or unsorted/negative sigma grid, seeds < 1,
  /// or empty kind/method/scenario lists.
  void validate() const;
};

inline constexpr int kResultSchemaVersion = 1;

struct ResultRow {
  std::string scenario;
  EstimationMethod method = EstimationMethod::kJoint;
  ObservationKind kind = ObservationKind::kFull;
  double sigma = 0.0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  double d_cos = 0.0;
  std::optional<double> position_error;  // missing on failure
  FailureKind failure = FailureKind::kNone;
  EstimationStatus status = EstimationStatus::kMaxIterations;
  double nll = 0.0;
  double presolve_nll = 0.0;
  double kkt_residual = 0.0;
  double estimate_seconds = 0.0;
  double predict_seconds = 0.0;

  bool failed() const { return failure != FailureKind::kNone; }
};

/// Cell order: scenario, kind, method, sigma, seed index (outermost first).
struct SweepCell {
  std::string scenario;
  ObservationKind kind;
  EstimationMethod method;
  double sigma;
  int seed_index;
};

std::vector<SweepCell> sweep_cells(const MonteCarloConfig& config);

/// Ground-truth demonstration: IBR from the zero-input rollout, with the root
/// verified (and polished) by Newton. Throws DomainError if no root is found.
ForwardSolution generate_demonstration(const Scenario& scenario);

/// observe -> estimate -> predict -> score for one cell; never throws on solver
/// trouble, which is recorded in the row instead.
ResultRow run_cell(const Scenario& scenario, const Trajectory& demonstration,
                   const SweepCell& cell, const MonteCarloConfig& config);

/// Runs every cell on a bounded worker pool. `on_row` is called from a single
/// thread at a time, in cell order, as soon as each row and all its
/// predecessors are complete.
std::vector<ResultRow> run_monte_carlo(const MonteCarloConfig& config,
                                       const std::function<void(const ResultRow&)>& on_row = {});

/// Result table CSV. Runtimes are not part of the main table (they would break
/// byte-identical reruns); see write_timing_header / format_timing_row.
void write_results_header(std::ostream& out);
void write_result_row(std::ostream& out, const ResultRow& row);
void write_timing_header(std::ostream& out);
void write_timing_row(std::ostream& out, const ResultRow& row);

/// Parses a table written by write_results_header/write_result_row.
std::vector<ResultRow> read_results(std::istream& in);

struct SummaryRow {
  std::string scenario;
  EstimationMethod method = EstimationMethod::kJoint;
  ObservationKind kind = ObservationKind::kFull;
  std::string metric;  // "d_cos" or "position_error"
  double sigma = 0.0;  // of the row at the window centre
  int count = 0;       // rows in the window
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;

  double iqr() const { return q3 - q1; }
};

/// Quantile with linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double p);

/// For each (scenario, method, kind, metric) the non-failure rows are sorted by
/// sigma and a centred window of `window` rows (shifted inward at the ends,
/// shrunk when fewer rows exist) is summarized at every row. Throws ConfigError
/// for an empty table or window < 1.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int window = 60);

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace invgame
