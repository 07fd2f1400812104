#pragma once

#include <cstdint>
#include <string>

#include "invgame/dynamics.hpp"

namespace invgame {

/// kFull observes every player's 4 state channels; kPartial drops the fourth
/// (speed for the unicycle, vy for the double integrator).
enum class ObservationKind { kFull, kPartial };

std::string to_string(ObservationKind kind);
ObservationKind observation_kind_from_string(const std::string& name);

/// Isotropic additive Gaussian noise y_t = h(x_t) + n_t, n_t ~ N(0, sigma^2 I).
/// One sigma covers position and heading channels alike.
struct ObservationModel {
  ObservationKind kind = ObservationKind::kFull;
  double sigma = 0.0;
  int players = 1;
  bool wrap_heading = true;  // channel 2 is an angle (unicycle only)

  int channels() const { return kind == ObservationKind::kFull ? 4 : 3; }
  int dimension() const { return players * channels(); }

  /// Throws ConfigError for sigma < 0 or players < 1.
  void validate() const;
};

ObservationModel make_observation_model(const GameDefinition& game, ObservationKind kind,
                                        double sigma);

struct ObservationSequence {
  ObservationModel model;
  Matrix y;  // dimension x T
  std::uint64_t seed = 0;

  int horizon() const { return static_cast<int>(y.cols()); }
};

/// h(x) for one joint state.
Vector expected_observation(const ObservationModel& model, const Vector& state);

/// Noise at step t depends only on (seed, t), so any subset of steps can be
/// synthesized independently and in any order.
ObservationSequence observe(const Trajectory& traj, const ObservationModel& model,
                            std::uint64_t seed);

/// h(x_t) - y_t per column with the heading channel wrapped to (-pi, pi].
Matrix observation_residuals(const ObservationSequence& obs, const Matrix& states);

/// sum_t ||y_t - h(x_t)||^2 (constants of the Gaussian log-density dropped).
double neg_log_likelihood(const ObservationSequence& obs, const Trajectory& traj);
double neg_log_likelihood(const ObservationSequence& obs, const Matrix& states);

/// Gradient of neg_log_likelihood with respect to the states, n x T.
Matrix neg_log_likelihood_gradient(const ObservationSequence& obs, const Matrix& states);

/// Maps a state channel of player i to its row in y, or -1 when unobserved.
int observation_row(const ObservationModel& model, int player, int channel);

double wrap_angle(double angle);

}  // namespace invgame
