#pragma once

#include <string>
#include <vector>

#include "invgame/objectives.hpp"

namespace invgame {

inline constexpr const char* kTwoPlayerCrossing = "two-player-crossing";
inline constexpr const char* kFivePlayerHighway = "five-player-highway";

/// A game together with its basis set and ground-truth objective weights.
/// Initial conditions and weights of the built-in scenarios are reconstructions
/// (`reconstructed == true`); they are used consistently for truth and scoring.
struct Scenario {
  std::string id;
  GameDefinition game;
  CostBasisSet basis;
  CostParameters theta_true;
  bool reconstructed = false;
  std::string notes;
};

/// Throws ConfigError for an unknown id.
Scenario build_scenario(const std::string& id);

std::vector<std::string> builtin_scenarios();

/// Two unicycle players, each heading for a goal on the far side of a shared
/// crossing region; five bases (goal, proximity, speed, yaw rate, acceleration).
Scenario two_player_crossing();

/// Five unicycles on a two-lane road; the goal basis is replaced by a quadratic
/// lane/speed deviation.
Scenario five_player_highway();

/// Single double-integrator player with bases (position deviation, input effort),
/// a linear-quadratic problem used for oracle comparisons.
Scenario single_player_lq(int horizon = 20, double dt = 0.2);

}  // namespace invgame
