#include "invgame/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace invgame {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

EstimationStatus estimation_status_from_string(const std::string& s) {
  for (auto st : {EstimationStatus::kConverged, EstimationStatus::kMaxIterations,
                  EstimationStatus::kPresolveDiverged, EstimationStatus::kStage2Diverged}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown estimation status '" + s + "'");
}

FailureKind failure_kind_from_string(const std::string& s) {
  for (auto k : {FailureKind::kNone, FailureKind::kPresolveDiverged, FailureKind::kStage2Diverged,
                 FailureKind::kForwardIllConditioned}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown failure kind '" + s + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

double cosine_error(const CostParameters& truth, const CostParameters& estimate) {
  if (truth.weights.size() != estimate.weights.size() || truth.weights.empty()) {
    throw ConfigError("cosine error needs matching, nonempty player lists");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < truth.weights.size(); ++i) {
    const Vector& a = truth.weights[i];
    const Vector& b = estimate.weights[i];
    if (a.size() != b.size()) throw ConfigError("cosine error: parameter dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine error of a zero-norm weight vector");
    total += std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  }
  return 1.0 - total / static_cast<double>(truth.weights.size());
}

double position_error(const Trajectory& predicted, const Trajectory& truth) {
  if (predicted.states.rows() != truth.states.rows() || predicted.horizon() != truth.horizon()) {
    throw ConfigError("position error needs trajectories of equal shape");
  }
  const int players = static_cast<int>(truth.states.rows()) / kPlayerStateDim;
  double total = 0.0;
  for (int k = 0; k < truth.horizon(); ++k) {
    for (int i = 0; i < players; ++i) total += (predicted.position(i, k) - truth.position(i, k)).norm();
  }
  return total / (static_cast<double>(players) * truth.horizon());
}

std::vector<double> sigma_grid(int levels, double max) {
  if (levels < 1) throw ConfigError("sigma grid needs at least one level");
  if (levels == 1) return {0.0};
  std::vector<double> grid(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) grid[l] = max * l / (levels - 1);
  return grid;
}

std::uint64_t cell_seed(std::uint64_t master_seed, int seed_index) {
  // splitmix64 step keyed by the index
  std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(seed_index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

MonteCarloConfig MonteCarloConfig::profile(const std::string& name) {
  MonteCarloConfig config;
  if (name == "desk") {
    config.seeds = 10;
    config.sigmas = sigma_grid(5, 0.2);
  } else if (name == "full") {
    config.seeds = 40;
    config.sigmas = sigma_grid(22);
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
  }
  return config;
}

void MonteCarloConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("no scenarios configured");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (sigmas.empty()) throw ConfigError("sigma grid is empty");
  for (std::size_t l = 0; l < sigmas.size(); ++l) {
    if (!(sigmas[l] >= 0.0)) throw ConfigError("sigma grid must be nonnegative");
    if (l > 0 && sigmas[l] < sigmas[l - 1]) throw ConfigError("sigma grid must be ascending");
  }
  if (kinds.empty() || methods.empty()) throw ConfigError("observation kinds and methods required");
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

std::vector<SweepCell> sweep_cells(const MonteCarloConfig& config) {
  std::vector<SweepCell> cells;
  for (const auto& scenario : config.scenarios) {
    for (auto kind : config.kinds) {
      for (auto method : config.methods) {
        for (double sigma : config.sigmas) {
          for (int s = 0; s < config.seeds; ++s) cells.push_back({scenario, kind, method, sigma, s});
        }
      }
    }
  }
  return cells;
}

ForwardSolution generate_demonstration(const Scenario& scenario) {
  const Trajectory init = zero_input_initialization(scenario.game);
  const ForwardSolution ibr = solve_olne_ibr(scenario.game, scenario.basis, scenario.theta_true, init);
  ForwardSolution verified =
      solve_olne_newton(scenario.game, scenario.basis, scenario.theta_true, ibr.trajectory);
  if (!verified.converged()) {
    throw DomainError("demonstration for '" + scenario.id + "' has no verified equilibrium root");
  }
  verified.method = "ibr+newton";
  return verified;
}

ResultRow run_cell(const Scenario& scenario, const Trajectory& demonstration,
                   const SweepCell& cell, const MonteCarloConfig& config) {
  ResultRow row;
  row.scenario = cell.scenario;
  row.method = cell.method;
  row.kind = cell.kind;
  row.sigma = cell.sigma;
  row.seed_index = cell.seed_index;
  row.seed = cell_seed(config.master_seed, cell.seed_index);

  const ObservationSequence obs = observe(
      demonstration, make_observation_model(scenario.game, cell.kind, cell.sigma), row.seed);
  auto start = std::chrono::steady_clock::now();
  EstimationResult est;
  bool thrown = false;
  try {
    est = solve_inverse(cell.method, obs, scenario.game, scenario.basis, config.inverse);
  } catch (const std::exception&) {
    thrown = true;
  }
  row.estimate_seconds = seconds_since(start);
  if (thrown) {
    row.status = EstimationStatus::kStage2Diverged;
    row.failure = FailureKind::kStage2Diverged;
    row.d_cos = std::nan("");
    return row;
  }
  row.status = est.status;
  row.failure = est.failure();
  row.nll = est.nll;
  row.presolve_nll = est.presolve_nll;
  row.kkt_residual = est.kkt_residual;
  row.d_cos = cosine_error(scenario.theta_true, est.theta);
  if (row.failed()) return row;

  start = std::chrono::steady_clock::now();
  const ForwardSolution prediction = predict(est.theta, scenario.game, scenario.basis, est.trajectory);
  row.predict_seconds = seconds_since(start);
  if (!prediction.converged()) {
    row.failure = FailureKind::kForwardIllConditioned;
    return row;
  }
  row.position_error = position_error(prediction.trajectory, demonstration);
  return row;
}

std::vector<ResultRow> run_monte_carlo(const MonteCarloConfig& config,
                                       const std::function<void(const ResultRow&)>& on_row) {
  config.validate();
  std::map<std::string, std::pair<Scenario, Trajectory>> cases;
  for (const auto& id : config.scenarios) {
    Scenario s = build_scenario(id);
    Trajectory demo = generate_demonstration(s).trajectory;
    cases.emplace(id, std::make_pair(std::move(s), std::move(demo)));
  }

  const std::vector<SweepCell> cells = sweep_cells(config);
  std::vector<std::optional<ResultRow>> slots(cells.size());
  std::size_t emitted = 0;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      const auto& [scenario, demo] = cases.at(cells[c].scenario);
      ResultRow row = run_cell(scenario, demo, cells[c], config);
      std::lock_guard<std::mutex> lock(mutex);
      slots[c] = std::move(row);
      // the single appender: flush the completed prefix in cell order
      while (emitted < slots.size() && slots[emitted]) {
        if (on_row) on_row(*slots[emitted]);
        ++emitted;
      }
    }
  };

  unsigned count = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                      : std::max(1u, std::thread::hardware_concurrency());
  count = std::min<unsigned>(count, static_cast<unsigned>(std::max<std::size_t>(cells.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<ResultRow> rows;
  rows.reserve(slots.size());
  for (auto& s : slots) rows.push_back(std::move(*s));
  return rows;
}

void write_results_header(std::ostream& out) {
  out << "schema_version,scenario,method,obs_kind,sigma,seed_index,seed,d_cos,position_error,"
         "failed,failure_kind,estimate_status,nll,kkt_residual,presolve_nll\n";
}

void write_result_row(std::ostream& out, const ResultRow& row) {
  out << kResultSchemaVersion << ',' << row.scenario << ',' << to_string(row.method) << ','
      << to_string(row.kind) << ',' << num(row.sigma) << ',' << row.seed_index << ',' << row.seed
      << ',' << num(row.d_cos) << ',' << (row.position_error ? num(*row.position_error) : "")
      << ',' << (row.failed() ? 1 : 0) << ',' << to_string(row.failure) << ','
      << to_string(row.status) << ',' << num(row.nll) << ',' << num(row.kkt_residual) << ','
      << num(row.presolve_nll) << '\n';
}

void write_timing_header(std::ostream& out) {
  out << "scenario,method,obs_kind,sigma,seed_index,estimate_seconds,predict_seconds\n";
}

void write_timing_row(std::ostream& out, const ResultRow& row) {
  out << row.scenario << ',' << to_string(row.method) << ',' << to_string(row.kind) << ','
      << num(row.sigma) << ',' << row.seed_index << ',' << num(row.estimate_seconds) << ','
      << num(row.predict_seconds) << '\n';
}

std::vector<ResultRow> read_results(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("result table is empty");
  const std::vector<std::string> header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  for (const char* required : {"schema_version", "scenario", "method", "obs_kind", "sigma",
                               "seed_index", "seed", "d_cos", "position_error", "failure_kind",
                               "estimate_status", "nll", "kkt_residual", "presolve_nll"}) {
    if (!col.count(required)) throw ConfigError(std::string("result table lacks column ") + required);
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != header.size()) throw ConfigError("malformed result row: " + line);
    if (std::stoi(f[col["schema_version"]]) != kResultSchemaVersion) {
      throw ConfigError("unsupported result schema version " + f[col["schema_version"]]);
    }
    ResultRow r;
    r.scenario = f[col["scenario"]];
    r.method = estimation_method_from_string(f[col["method"]]);
    r.kind = observation_kind_from_string(f[col["obs_kind"]]);
    r.sigma = std::stod(f[col["sigma"]]);
    r.seed_index = std::stoi(f[col["seed_index"]]);
    r.seed = std::stoull(f[col["seed"]]);
    r.d_cos = std::stod(f[col["d_cos"]]);
    if (!f[col["position_error"]].empty()) r.position_error = std::stod(f[col["position_error"]]);
    r.failure = failure_kind_from_string(f[col["failure_kind"]]);
    r.status = estimation_status_from_string(f[col["estimate_status"]]);
    r.nll = std::stod(f[col["nll"]]);
    r.kkt_residual = std::stod(f[col["kkt_residual"]]);
    r.presolve_nll = std::stod(f[col["presolve_nll"]]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int window) {
  if (rows.empty()) throw ConfigError("cannot summarize an empty table");
  if (window < 1) throw ConfigError("window must be >= 1");

  // groups in order of first appearance
  std::vector<std::tuple<std::string, EstimationMethod, ObservationKind>> keys;
  std::map<std::tuple<std::string, int, int>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.scenario, static_cast<int>(r.method), static_cast<int>(r.kind));
    if (!groups.count(key)) keys.emplace_back(r.scenario, r.method, r.kind);
    groups[key].push_back(&r);
  }

  std::vector<SummaryRow> out;
  for (const auto& [scenario, method, kind] : keys) {
    auto members = groups[std::make_tuple(scenario, static_cast<int>(method), static_cast<int>(kind))];
    std::stable_sort(members.begin(), members.end(),
                     [](const ResultRow* a, const ResultRow* b) { return a->sigma < b->sigma; });
    for (const char* metric : {"d_cos", "position_error"}) {
      std::vector<std::pair<double, double>> series;  // (sigma, value)
      for (const ResultRow* r : members) {
        if (r->failed()) continue;
        const std::optional<double> v =
            std::string(metric) == "d_cos" ? std::optional<double>(r->d_cos) : r->position_error;
        if (v && std::isfinite(*v)) series.emplace_back(r->sigma, *v);
      }
      const std::size_t n = series.size();
      const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t begin = std::min(j > w / 2 ? j - w / 2 : 0, n - w);
        std::vector<double> values;
        for (std::size_t q = begin; q < begin + w; ++q) values.push_back(series[q].second);
        SummaryRow s;
        s.scenario = scenario;
        s.method = method;
        s.kind = kind;
        s.metric = metric;
        s.sigma = series[j].first;
        s.count = static_cast<int>(w);
        s.median = quantile(values, 0.5);
        s.q1 = quantile(values, 0.25);
        s.q3 = quantile(values, 0.75);
        out.push_back(s);
      }
    }
  }
  return out;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "schema_version,scenario,method,obs_kind,metric,sigma,count,median,q1,q3,iqr\n";
  for (const auto& r : rows) {
    out << kResultSchemaVersion << ',' << r.scenario << ',' << to_string(r.method) << ','
        << to_string(r.kind) << ',' << r.metric << ',' << num(r.sigma) << ',' << r.count << ','
        << num(r.median) << ',' << num(r.q1) << ',' << num(r.q3) << ',' << num(r.iqr()) << '\n';
  }
}

}  // namespace invgame
