#include "io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace invgame::io {
namespace {

Json vec(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vec_from(const Json& j, Eigen::Index expected = -1) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  if (expected >= 0 && v.size() != expected) {
    throw ConfigError("array has length " + std::to_string(v.size()) + ", expected " +
                      std::to_string(expected));
  }
  return v;
}

Json columns(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(vec(m.col(c)));
  return out;
}

Matrix columns_from(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of columns");
  if (j.empty()) return Matrix();
  const auto rows = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) m.col(c) = vec_from(j[c], rows);
  return m;
}

// NaN and infinities have no JSON literal; they travel as null.
double number_or_nan(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j[key].get<double>();
}

Json basis_to_json(const BasisDescriptor& b) {
  Json j{{"name", b.name()}};
  switch (b.kind) {
    case BasisKind::kGoal:
      j["goal"] = {b.goal.x(), b.goal.y()};
      j["goal_steps"] = b.goal_steps;
      break;
    case BasisKind::kInputEffort:
      if (b.input_mask != 0b01 && b.input_mask != 0b10) j["input_mask"] = b.input_mask;
      break;
    case BasisKind::kStateDeviation:
      j["reference"] = vec(b.reference);
      j["weights"] = vec(b.deviation_weights);
      break;
    default:
      break;
  }
  return j;
}

BasisDescriptor basis_from_json(const Json& j) {
  const std::string name = j.at("name").get<std::string>();
  if (name == "goal") {
    const Vector g = vec_from(j.at("goal"), 2);
    return BasisDescriptor::Goal({g(0), g(1)}, j.at("goal_steps").get<int>());
  }
  if (name == "proximity") return BasisDescriptor::Proximity();
  if (name == "speed") return BasisDescriptor::Speed();
  if (name == "yaw_rate_effort") return BasisDescriptor::YawRateEffort();
  if (name == "acceleration_effort") return BasisDescriptor::AccelerationEffort();
  if (name == "input_effort") return BasisDescriptor::InputEffort(j.value("input_mask", 0b11));
  if (name == "state_deviation") {
    return BasisDescriptor::StateDeviation(vec_from(j.at("reference"), 4),
                                           vec_from(j.at("weights"), 4));
  }
  throw ConfigError("unknown basis '" + name + "'");
}

void check_version(const Json& j) {
  if (j.contains("schema_version") && j["schema_version"].get<int>() != kFileSchemaVersion) {
    throw ConfigError("unsupported schema version " + j["schema_version"].dump());
  }
}

ForwardStatus forward_status_from_string(const std::string& s) {
  for (auto st : {ForwardStatus::kConverged, ForwardStatus::kMaxIterations,
                  ForwardStatus::kIllConditioned}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown forward status '" + s + "'");
}

EstimationStatus estimation_status_from_string(const std::string& s) {
  for (auto st : {EstimationStatus::kConverged, EstimationStatus::kMaxIterations,
                  EstimationStatus::kPresolveDiverged, EstimationStatus::kStage2Diverged}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown estimation status '" + s + "'");
}

}  // namespace

Json to_json(const Scenario& s) {
  Json bases = Json::array();
  for (const auto& player : s.basis.players) {
    Json list = Json::array();
    for (const auto& b : player) list.push_back(basis_to_json(b));
    bases.push_back(list);
  }
  return {{"schema_version", kFileSchemaVersion},
          {"id", s.id},
          {"name", s.game.name},
          {"players", s.game.players},
          {"horizon", s.game.horizon},
          {"dt", s.game.dt},
          {"dynamics", to_string(s.game.dynamics)},
          {"initial_state", vec(s.game.initial_state)},
          {"bases", bases},
          {"theta_true", to_json(s.theta_true)},
          {"reconstructed", s.reconstructed},
          {"notes", s.notes}};
}

Scenario scenario_from_json(const Json& j) {
  check_version(j);
  Scenario s;
  try {
    s.id = j.at("id").get<std::string>();
    s.game.name = j.value("name", s.id);
    s.game.players = j.at("players").get<int>();
    s.game.horizon = j.at("horizon").get<int>();
    s.game.dt = j.at("dt").get<double>();
    s.game.dynamics = dynamics_kind_from_string(j.value("dynamics", "unicycle"));
    s.game.initial_state = vec_from(j.at("initial_state"));
    for (const auto& player : j.at("bases")) {
      std::vector<BasisDescriptor> list;
      for (const auto& b : player) list.push_back(basis_from_json(b));
      s.basis.players.push_back(std::move(list));
    }
    s.reconstructed = j.value("reconstructed", false);
    s.notes = j.value("notes", "");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  s.game.validate();
  if (s.basis.player_count() != s.game.players) {
    throw ConfigError("scenario lists bases for " + std::to_string(s.basis.player_count()) +
                      " players, expected " + std::to_string(s.game.players));
  }
  s.theta_true = theta_from_json(j.at("theta_true"), s.basis);
  return s;
}

Json to_json(const Trajectory& traj) {
  Json costates = Json::array();
  for (const auto& c : traj.costates) costates.push_back(columns(c));
  return {{"states", columns(traj.states)},
          {"inputs", columns(traj.inputs)},
          {"costates", costates},
          {"feasible", traj.feasible}};
}

Trajectory trajectory_from_json(const Json& j) {
  Trajectory t;
  try {
    t.states = columns_from(j.at("states"));
    t.inputs = columns_from(j.at("inputs"));
    if (j.contains("costates")) {
      for (const auto& c : j["costates"]) t.costates.push_back(columns_from(c));
    }
    t.feasible = j.value("feasible", false);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed trajectory: ") + e.what());
  }
  return t;
}

Json to_json(const ForwardSolution& solution, const Scenario& scenario) {
  Json j = to_json(solution.trajectory);
  j["schema_version"] = kFileSchemaVersion;
  j["status"] = to_string(solution.status);
  j["method"] = solution.method;
  j["kkt_residual"] = solution.residual_norm;
  j["dynamics_residual"] = solution.dynamics_residual_norm;
  j["iterations"] = solution.iterations;
  j["scenario"] = to_json(scenario);
  return j;
}

Json to_json(const ObservationSequence& obs, const Scenario& scenario) {
  return {{"schema_version", kFileSchemaVersion},
          {"kind", to_string(obs.model.kind)},
          {"sigma", obs.model.sigma},
          {"players", obs.model.players},
          {"wrap_heading", obs.model.wrap_heading},
          {"seed", obs.seed},
          {"y", columns(obs.y)},
          {"scenario", to_json(scenario)}};
}

ObservationSequence observation_from_json(const Json& j) {
  check_version(j);
  ObservationSequence obs;
  try {
    obs.model.kind = observation_kind_from_string(j.at("kind").get<std::string>());
    obs.model.sigma = j.at("sigma").get<double>();
    obs.model.players = j.at("players").get<int>();
    obs.model.wrap_heading = j.value("wrap_heading", true);
    obs.seed = j.value("seed", std::uint64_t{0});
    obs.y = columns_from(j.at("y"));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed observation: ") + e.what());
  }
  obs.model.validate();
  if (obs.y.rows() != obs.model.dimension()) {
    throw ConfigError("observation rows do not match the model dimension");
  }
  return obs;
}

Json to_json(const EstimationResult& est, const Scenario& scenario) {
  Json diagnostics{{"nll", est.nll},
                   {"presolve_nll", est.presolve_nll},
                   {"kkt_residual", est.kkt_residual},
                   {"dynamics_residual", est.dynamics_residual},
                   {"iterations", est.iterations},
                   {"presolve_iterations", est.presolve_iterations}};
  return {{"schema_version", kFileSchemaVersion},
          {"method", to_string(est.method)},
          {"theta", to_json(est.theta)},
          {"status", to_string(est.status)},
          {"failure", to_string(est.failure())},
          {"diagnostics", diagnostics},
          {"trajectory", to_json(est.trajectory)},
          {"scenario", to_json(scenario)}};
}

EstimationResult estimate_from_json(const Json& j) {
  check_version(j);
  EstimationResult est;
  const Scenario scenario = embedded_scenario(j);
  try {
    est.method = estimation_method_from_string(j.at("method").get<std::string>());
    est.theta = theta_from_json(j.at("theta"), scenario.basis);
    est.status = estimation_status_from_string(j.at("status").get<std::string>());
    const Json& d = j.at("diagnostics");
    est.nll = number_or_nan(d, "nll");
    est.presolve_nll = number_or_nan(d, "presolve_nll");
    est.kkt_residual = number_or_nan(d, "kkt_residual");
    est.dynamics_residual = number_or_nan(d, "dynamics_residual");
    est.iterations = d.value("iterations", 0);
    est.presolve_iterations = d.value("presolve_iterations", 0);
    est.trajectory = trajectory_from_json(j.at("trajectory"));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed estimate: ") + e.what());
  }
  return est;
}

Json to_json(const CostParameters& theta) {
  Json out = Json::array();
  for (const auto& w : theta.weights) out.push_back(vec(w));
  return out;
}

CostParameters theta_from_json(const Json& j, const CostBasisSet& basis) {
  if (!j.is_array() || static_cast<int>(j.size()) != basis.player_count()) {
    throw ConfigError("theta needs one weight array per player");
  }
  CostParameters theta;
  for (int i = 0; i < basis.player_count(); ++i) {
    theta.weights.push_back(vec_from(j[i], basis.dimension(i)));
  }
  return theta;
}

CostParameters parse_theta(const std::string& text, const CostBasisSet& basis) {
  if (std::filesystem::exists(text)) return theta_from_json(read_json(text), basis);
  Json players = Json::array();
  std::istringstream in(text);
  std::string player;
  while (std::getline(in, player, ';')) {
    Json weights = Json::array();
    std::istringstream fields(player);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        weights.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ConfigError("cannot parse theta entry '" + field + "'");
      }
    }
    players.push_back(weights);
  }
  return theta_from_json(players, basis);
}

Scenario load_scenario(const std::string& id_or_path) {
  for (const auto& id : builtin_scenarios()) {
    if (id == id_or_path) return build_scenario(id);
  }
  if (std::filesystem::exists(id_or_path)) return scenario_from_json(read_json(id_or_path));
  return build_scenario(id_or_path);  // throws with the list of known ids
}

Scenario embedded_scenario(const Json& artifact) {
  if (!artifact.contains("scenario")) throw ConfigError("file carries no scenario; pass --scenario");
  return scenario_from_json(artifact["scenario"]);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(1) << '\n';
}

}  // namespace invgame::io
