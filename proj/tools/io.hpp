#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "invgame/experiments.hpp"

namespace invgame::io {

using Json = nlohmann::json;

inline constexpr int kFileSchemaVersion = 1;

// Scenario files:
//   { schema_version, id, name, players, horizon, dt, dynamics, initial_state[4N],
//     bases: [[{name, ...constants}] per player], theta_true: [[w] per player],
//     reconstructed, notes }
// Basis constants: goal {goal: [x, y], goal_steps}; input_effort {input_mask};
// state_deviation {reference[4], weights[4]}. proximity, speed, yaw_rate_effort
// and acceleration_effort take none.
Json to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& j);

// Matrices are stored time-major: one inner array per column.
Json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);

Json to_json(const ForwardSolution& solution, const Scenario& scenario);
Json to_json(const ObservationSequence& obs, const Scenario& scenario);
ObservationSequence observation_from_json(const Json& j);
Json to_json(const EstimationResult& est, const Scenario& scenario);
EstimationResult estimate_from_json(const Json& j);

Json to_json(const CostParameters& theta);
CostParameters theta_from_json(const Json& j, const CostBasisSet& basis);

/// "w,w,..;w,w,.." (players separated by ';') or a path to a JSON array of arrays.
CostParameters parse_theta(const std::string& text, const CostBasisSet& basis);

/// A builtin scenario id or a path to a scenario file.
Scenario load_scenario(const std::string& id_or_path);

/// Artifacts written by the CLI embed their scenario; this recovers it.
Scenario embedded_scenario(const Json& artifact);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

}  // namespace invgame::io
