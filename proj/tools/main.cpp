#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "io.hpp"

namespace {

using namespace invgame;

// 0 ok, 1 solver did not converge (artifact still written), 2 bad input
constexpr int kNotConverged = 1;
constexpr int kBadInput = 2;

struct Options {
  std::string scenario;
  std::string theta;
  std::string in;
  std::string out;
  std::string timing;
  double sigma = 0.0;
  std::string kind = "full";
  std::string method = "joint";
  std::uint64_t seed = 0;
  std::string profile = "desk";
  std::vector<std::string> scenarios;
  std::vector<std::string> methods;
  std::vector<std::string> kinds;
  std::vector<double> sigmas;
  int seeds = 0;
  int workers = 0;
  int window = 60;
  bool quiet = false;
};

void emit(const Options& o, const io::Json& j) {
  if (o.out.empty() || o.out == "-") {
    std::cout << j.dump(1) << '\n';
  } else {
    io::write_json(o.out, j);
  }
}

int run_forward(const Options& o) {
  const Scenario s = io::load_scenario(o.scenario);
  const CostParameters theta = o.theta.empty() ? s.theta_true : io::parse_theta(o.theta, s.basis);
  theta.validate(s.basis, 0.0);
  const ForwardSolution sol = solve_forward(s.game, s.basis, theta);
  emit(o, io::to_json(sol, s));
  std::fprintf(stderr, "forward: %s via %s, |G|inf = %.3g\n", to_string(sol.status).c_str(),
               sol.method.c_str(), sol.residual_norm);
  return sol.converged() ? 0 : kNotConverged;
}

int run_observe(const Options& o) {
  const io::Json j = io::read_json(o.in);
  const Scenario s = o.scenario.empty() ? io::embedded_scenario(j) : io::load_scenario(o.scenario);
  const Trajectory traj = io::trajectory_from_json(j);
  check_trajectory_shape(s.game, traj);
  const auto model = make_observation_model(s.game, observation_kind_from_string(o.kind), o.sigma);
  emit(o, io::to_json(observe(traj, model, o.seed), s));
  return 0;
}

int run_inverse(const Options& o) {
  const io::Json j = io::read_json(o.in);
  const Scenario s = o.scenario.empty() ? io::embedded_scenario(j) : io::load_scenario(o.scenario);
  const ObservationSequence obs = io::observation_from_json(j);
  if (obs.model.players != s.game.players || obs.horizon() != s.game.horizon) {
    throw ConfigError("observation does not match the scenario");
  }
  const EstimationResult est =
      solve_inverse(estimation_method_from_string(o.method), obs, s.game, s.basis);
  emit(o, io::to_json(est, s));
  std::fprintf(stderr, "inverse (%s): %s, D_cos vs scenario truth = %.3g\n", o.method.c_str(),
               to_string(est.status).c_str(), cosine_error(s.theta_true, est.theta));
  return est.converged() ? 0 : kNotConverged;
}

int run_predict(const Options& o) {
  const io::Json j = io::read_json(o.in);
  const Scenario s = o.scenario.empty() ? io::embedded_scenario(j) : io::load_scenario(o.scenario);
  const EstimationResult est = io::estimate_from_json(j);
  const ForwardSolution sol = predict(est.theta, s.game, s.basis, est.trajectory);
  emit(o, io::to_json(sol, s));
  std::fprintf(stderr, "predict: %s\n", to_string(sol.status).c_str());
  return sol.converged() ? 0 : kNotConverged;
}

int run_montecarlo(const Options& o) {
  MonteCarloConfig config = MonteCarloConfig::profile(o.profile);
  if (!o.scenarios.empty()) config.scenarios = o.scenarios;
  if (!o.sigmas.empty()) config.sigmas = o.sigmas;
  if (o.seeds > 0) config.seeds = o.seeds;
  if (!o.methods.empty()) {
    config.methods.clear();
    for (const auto& m : o.methods) config.methods.push_back(estimation_method_from_string(m));
  }
  if (!o.kinds.empty()) {
    config.kinds.clear();
    for (const auto& k : o.kinds) config.kinds.push_back(observation_kind_from_string(k));
  }
  config.master_seed = o.seed;
  config.workers = o.workers;
  config.validate();

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!o.out.empty() && o.out != "-") {
    file.open(o.out);
    if (!file) throw ConfigError("cannot write " + o.out);
    out = &file;
  }
  std::ofstream timing;
  if (!o.timing.empty()) {
    timing.open(o.timing);
    if (!timing) throw ConfigError("cannot write " + o.timing);
    write_timing_header(timing);
  }
  write_results_header(*out);
  out->flush();
  const std::size_t total = sweep_cells(config).size();
  std::size_t done = 0;
  run_monte_carlo(config, [&](const ResultRow& row) {
    write_result_row(*out, row);
    out->flush();
    if (timing.is_open()) write_timing_row(timing, row);
    ++done;
    if (!o.quiet) {
      std::fprintf(stderr, "[%zu/%zu] %s %s %s sigma=%.3f seed=%d d_cos=%.3g%s\n", done, total,
                   row.scenario.c_str(), to_string(row.method).c_str(),
                   to_string(row.kind).c_str(), row.sigma, row.seed_index, row.d_cos,
                   row.failed() ? (" FAILED " + to_string(row.failure)).c_str() : "");
    }
  });
  return 0;
}

int run_summarize(const Options& o) {
  std::ifstream in(o.in);
  if (!in) throw ConfigError("cannot open " + o.in);
  const auto summary = summarize(read_results(in), o.window);
  if (o.out.empty() || o.out == "-") {
    write_summary(std::cout, summary);
  } else {
    std::ofstream out(o.out);
    if (!out) throw ConfigError("cannot write " + o.out);
    write_summary(out, summary);
  }
  return 0;
}

int run_scenario(const Options& o) {
  emit(o, io::to_json(io::load_scenario(o.scenario)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward and inverse open-loop Nash trajectory games"};
  app.require_subcommand(1);
  Options o;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out,-o", o.out, "Output path ('-' or omitted: stdout)");
  };

  auto* forward = app.add_subcommand("forward", "Scenario + weights -> equilibrium trajectory JSON");
  forward->add_option("--scenario", o.scenario, "Builtin id or scenario JSON")->required();
  forward->add_option("--theta", o.theta, "Weights 'w,..;w,..' or JSON file (default: truth)");
  add_out(forward);

  auto* obs = app.add_subcommand("observe", "Trajectory JSON -> noisy observation JSON");
  obs->add_option("--in,-i", o.in, "Trajectory JSON")->required()->check(CLI::ExistingFile);
  obs->add_option("--scenario", o.scenario, "Override the embedded scenario");
  obs->add_option("--sigma", o.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  obs->add_option("--obs-kind", o.kind, "full|partial")->check(CLI::IsMember({"full", "partial"}));
  obs->add_option("--seed", o.seed, "Noise seed");
  add_out(obs);

  auto* inv = app.add_subcommand("inverse", "Observation JSON -> estimate JSON");
  inv->add_option("--in,-i", o.in, "Observation JSON")->required()->check(CLI::ExistingFile);
  inv->add_option("--scenario", o.scenario, "Override the embedded scenario");
  inv->add_option("--method", o.method, "joint|baseline")->check(CLI::IsMember({"joint", "baseline"}));
  add_out(inv);

  auto* pred = app.add_subcommand("predict", "Estimate JSON -> predicted trajectory JSON");
  pred->add_option("--in,-i", o.in, "Estimate JSON")->required()->check(CLI::ExistingFile);
  pred->add_option("--scenario", o.scenario, "Override the embedded scenario");
  add_out(pred);

  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo sweep -> result CSV");
  mc->add_option("--profile", o.profile, "desk|full")->check(CLI::IsMember({"desk", "full"}));
  mc->add_option("--scenario", o.scenarios, "Scenario id(s) (default: two-player-crossing)");
  mc->add_option("--sigma", o.sigmas, "Sigma grid override (ascending)");
  mc->add_option("--seeds", o.seeds, "Seeds per level override")->check(CLI::PositiveNumber);
  mc->add_option("--method", o.methods, "Restrict methods")->check(CLI::IsMember({"joint", "baseline"}));
  mc->add_option("--obs-kind", o.kinds, "Restrict observation kinds")
      ->check(CLI::IsMember({"full", "partial"}));
  mc->add_option("--seed", o.seed, "Master seed");
  mc->add_option("--workers", o.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  mc->add_option("--timing", o.timing, "Optional runtime sidecar CSV");
  mc->add_flag("--quiet,-q", o.quiet, "No progress on stderr");
  add_out(mc);

  auto* sum = app.add_subcommand("summarize", "Result CSV -> rolling median/IQR CSV");
  sum->add_option("--in,-i", o.in, "Result CSV")->required()->check(CLI::ExistingFile);
  sum->add_option("--window", o.window, "Rolling window in rows")->check(CLI::PositiveNumber);
  add_out(sum);

  auto* scen = app.add_subcommand("scenario", "Write a builtin scenario as JSON");
  scen->add_option("--scenario", o.scenario, "Builtin id")->required();
  add_out(scen);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*forward) return run_forward(o);
    if (*obs) return run_observe(o);
    if (*inv) return run_inverse(o);
    if (*pred) return run_predict(o);
    if (*mc) return run_montecarlo(o);
    if (*sum) return run_summarize(o);
    if (*scen) return run_scenario(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return 0;
}
