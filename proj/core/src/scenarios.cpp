#include "invgame/scenarios.hpp"

#include <cmath>
#include <numbers>

namespace invgame {

Scenario two_player_crossing() {
  Scenario s;
  s.id = kTwoPlayerCrossing;
  s.reconstructed = true;
  s.notes = "initial states, goals and weights reconstructed; goals lie opposite the start";
  s.game.name = s.id;
  s.game.players = 2;
  s.game.horizon = 50;
  s.game.dt = 0.5;
  s.game.dynamics = DynamicsKind::kUnicycle;
  s.game.initial_state.resize(8);
  s.game.initial_state << -3.0, 0.4, 0.0, 1.0,  //
      0.5, -3.0, std::numbers::pi / 2.0, 1.0;
  const int goal_steps = default_goal_steps(s.game.horizon);
  const Eigen::Vector2d goals[2] = {{3.0, 0.4}, {0.5, 3.0}};
  for (const auto& goal : goals) {
    s.basis.players.push_back({BasisDescriptor::Goal(goal, goal_steps),
                               BasisDescriptor::Proximity(), BasisDescriptor::Speed(),
                               BasisDescriptor::YawRateEffort(),
                               BasisDescriptor::AccelerationEffort()});
  }
  s.theta_true.normalized = true;
  s.theta_true.weights.resize(2);
  s.theta_true.weights[0] = (Vector(5) << 0.5, 0.02, 0.18, 0.15, 0.15).finished();
  s.theta_true.weights[1] = (Vector(5) << 0.45, 0.02, 0.18, 0.15, 0.2).finished();
  return s;
}

Scenario five_player_highway() {
  Scenario s;
  s.id = kFivePlayerHighway;
  s.reconstructed = true;
  s.notes = "two-lane road; lanes, speeds and weights reconstructed; player 5 overtakes";
  s.game.name = s.id;
  s.game.players = 5;
  s.game.horizon = 50;
  s.game.dt = 0.5;
  s.game.dynamics = DynamicsKind::kUnicycle;
  constexpr double lane_width = 1.5;
  // px, py, psi, v and lane / preferred speed per player
  const double setup[5][6] = {
      {0.0, 0.0, 0.0, 1.0, 0.0, 1.0},
      {3.0, 0.0, 0.0, 0.8, 0.0, 0.8},
      {1.0, lane_width, 0.0, 1.0, lane_width, 1.2},
      {5.0, lane_width, 0.0, 1.0, lane_width, 1.0},
      {-3.0, 0.0, 0.0, 1.4, lane_width, 1.5},
  };
  s.game.initial_state.resize(20);
  const Eigen::Vector4d q(0.0, 1.0, 0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    s.game.initial_state.segment<4>(4 * i) << setup[i][0], setup[i][1], setup[i][2], setup[i][3];
    const Eigen::Vector4d reference(0.0, setup[i][4], 0.0, setup[i][5]);
    s.basis.players.push_back({BasisDescriptor::StateDeviation(reference, q),
                               BasisDescriptor::Proximity(), BasisDescriptor::Speed(),
                               BasisDescriptor::YawRateEffort(),
                               BasisDescriptor::AccelerationEffort()});
  }
  s.theta_true.normalized = true;
  const double weights[5][5] = {
      {0.4, 0.05, 0.05, 0.25, 0.25}, {0.45, 0.05, 0.1, 0.2, 0.2},  {0.35, 0.1, 0.05, 0.25, 0.25},
      {0.4, 0.1, 0.1, 0.2, 0.2},     {0.5, 0.05, 0.05, 0.2, 0.2},
  };
  for (const auto& w : weights) s.theta_true.weights.push_back(Eigen::Map<const Vector>(w, 5));
  return s;
}

Scenario single_player_lq(int horizon, double dt) {
  Scenario s;
  s.id = "single-player-lq";
  s.game.name = s.id;
  s.game.players = 1;
  s.game.horizon = horizon;
  s.game.dt = dt;
  s.game.dynamics = DynamicsKind::kDoubleIntegrator;
  s.game.initial_state = (Vector(4) << 2.0, -1.0, 0.5, 0.3).finished();
  s.basis.players.push_back(
      {BasisDescriptor::StateDeviation(Eigen::Vector4d::Zero(), Eigen::Vector4d(1.0, 1.0, 0.0, 0.0)),
       BasisDescriptor::InputEffort(0b11)});
  s.theta_true.normalized = true;
  s.theta_true.weights.push_back((Vector(2) << 0.6, 0.4).finished());
  return s;
}

std::vector<std::string> builtin_scenarios() { return {kTwoPlayerCrossing, kFivePlayerHighway}; }

Scenario build_scenario(const std::string& id) {
  if (id == kTwoPlayerCrossing) return two_player_crossing();
  if (id == kFivePlayerHighway) return five_player_highway();
  if (id == "single-player-lq") return single_player_lq();
  throw ConfigError("unknown scenario '" + id + "'");
}

}  // namespace invgame
