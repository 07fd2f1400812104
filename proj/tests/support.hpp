#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "invgame/dynamics.hpp"

namespace invgame::testing {

// Central differences, written independently of the library's own checker.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z,
                          double rel_step = 1e-6) {
  const Vector f0 = f(z);
  Matrix jac(f0.size(), z.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    const double h = rel_step * std::max(1.0, std::abs(z(c)));
    Vector zp = z;
    Vector zm = z;
    zp(c) += h;
    zm(c) -= h;
    jac.col(c) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return jac;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& z,
                          double rel_step = 1e-6) {
  return fd_jacobian([&](const Vector& x) { return Vector::Constant(1, f(x)); }, z, rel_step)
      .row(0)
      .transpose();
}

// max_ij |a - b| / max(1, |b|)
inline double rel_error(const Matrix& analytic, const Matrix& reference) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double b = reference(i, j);
      worst = std::max(worst, std::abs(analytic(i, j) - b) / std::max(1.0, std::abs(b)));
    }
  }
  return worst;
}

inline Vector uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Random, generally infeasible trajectory with player positions spread apart.
inline Trajectory random_trajectory(const GameDefinition& game, std::mt19937_64& rng) {
  Trajectory t;
  t.states.resize(game.state_dim(), game.horizon);
  t.inputs.resize(game.input_dim(), game.horizon);
  for (int k = 0; k < game.horizon; ++k) {
    t.states.col(k) = uniform(rng, game.state_dim(), -1.0, 1.0);
    for (int i = 0; i < game.players; ++i) t.states(kPlayerStateDim * i, k) += 4.0 * i;
    t.inputs.col(k) = uniform(rng, game.input_dim(), -1.0, 1.0);
  }
  return t;
}

}  // namespace invgame::testing
