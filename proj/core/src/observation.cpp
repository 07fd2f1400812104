#include "invgame/observation.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace invgame {
namespace {

// splitmix64 finalizer; decorrelates neighbouring (seed, t) keys
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_states(const ObservationSequence& obs, const Matrix& states) {
  if (states.rows() != kPlayerStateDim * obs.model.players || states.cols() != obs.horizon()) {
    throw ConfigError("trajectory does not match the observation sequence");
  }
  if (obs.y.rows() != obs.model.dimension()) {
    throw ConfigError("observation rows do not match the model dimension");
  }
}

}  // namespace

std::string to_string(ObservationKind kind) {
  return kind == ObservationKind::kFull ? "full" : "partial";
}

ObservationKind observation_kind_from_string(const std::string& name) {
  if (name == "full") return ObservationKind::kFull;
  if (name == "partial") return ObservationKind::kPartial;
  throw ConfigError("unknown observation kind '" + name + "'");
}

void ObservationModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
  if (players < 1) throw ConfigError("observation model needs at least one player");
}

ObservationModel make_observation_model(const GameDefinition& game, ObservationKind kind,
                                        double sigma) {
  ObservationModel model{kind, sigma, game.players, game.dynamics == DynamicsKind::kUnicycle};
  model.validate();
  return model;
}

double wrap_angle(double angle) {
  double r = std::remainder(angle, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

int observation_row(const ObservationModel& model, int player, int channel) {
  if (channel >= model.channels()) return -1;
  return player * model.channels() + channel;
}

Vector expected_observation(const ObservationModel& model, const Vector& state) {
  Vector y(model.dimension());
  const int c = model.channels();
  for (int i = 0; i < model.players; ++i) {
    y.segment(i * c, c) = state.segment(kPlayerStateDim * i, c);
  }
  return y;
}

ObservationSequence observe(const Trajectory& traj, const ObservationModel& model,
                            std::uint64_t seed) {
  model.validate();
  ObservationSequence obs{model, Matrix(model.dimension(), traj.horizon()), seed};
  check_states(obs, traj.states);
  for (int t = 0; t < traj.horizon(); ++t) {
    obs.y.col(t) = expected_observation(model, traj.states.col(t));
    if (model.sigma == 0.0) continue;
    std::mt19937_64 engine(mix(mix(seed) ^ static_cast<std::uint64_t>(t)));
    std::normal_distribution<double> noise(0.0, model.sigma);
    for (Eigen::Index r = 0; r < obs.y.rows(); ++r) obs.y(r, t) += noise(engine);
  }
  return obs;
}

Matrix observation_residuals(const ObservationSequence& obs, const Matrix& states) {
  check_states(obs, states);
  Matrix r(obs.y.rows(), obs.y.cols());
  for (int t = 0; t < obs.horizon(); ++t) {
    r.col(t) = expected_observation(obs.model, states.col(t)) - obs.y.col(t);
  }
  if (obs.model.wrap_heading) {
    for (int i = 0; i < obs.model.players; ++i) {
      const int row = observation_row(obs.model, i, 2);
      for (int t = 0; t < obs.horizon(); ++t) r(row, t) = wrap_angle(r(row, t));
    }
  }
  return r;
}

double neg_log_likelihood(const ObservationSequence& obs, const Matrix& states) {
  return observation_residuals(obs, states).squaredNorm();
}

double neg_log_likelihood(const ObservationSequence& obs, const Trajectory& traj) {
  return neg_log_likelihood(obs, traj.states);
}

Matrix neg_log_likelihood_gradient(const ObservationSequence& obs, const Matrix& states) {
  const Matrix r = observation_residuals(obs, states);
  Matrix g = Matrix::Zero(states.rows(), states.cols());
  const int c = obs.model.channels();
  for (int i = 0; i < obs.model.players; ++i) {
    g.middleRows(kPlayerStateDim * i, c) = 2.0 * r.middleRows(i * c, c);
  }
  return g;
}

}  // namespace invgame
