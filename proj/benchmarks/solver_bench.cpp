#include <benchmark/benchmark.h>

#include "invgame/experiments.hpp"

namespace invgame {
namespace {

const Scenario& scenario(int players) {
  static const Scenario two = build_scenario(kTwoPlayerCrossing);
  static const Scenario five = build_scenario(kFivePlayerHighway);
  return players == 2 ? two : five;
}

const Trajectory& demonstration(int players) {
  static const Trajectory two = generate_demonstration(scenario(2)).trajectory;
  static const Trajectory five = generate_demonstration(scenario(5)).trajectory;
  return players == 2 ? two : five;
}

ObservationSequence noisy(int players, double sigma) {
  const Scenario& s = scenario(players);
  return observe(demonstration(players), make_observation_model(s.game, ObservationKind::kPartial, sigma), 7);
}

void BM_KktAssembly(benchmark::State& state) {
  const Scenario& s = scenario(static_cast<int>(state.range(0)));
  Trajectory t = demonstration(static_cast<int>(state.range(0)));
  t.costates = fit_costates(s.game, s.basis, t, s.theta_true);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_kkt(s.game, s.basis, t, s.theta_true));
}
BENCHMARK(BM_KktAssembly)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_NewtonForward(benchmark::State& state) {
  const Scenario& s = scenario(static_cast<int>(state.range(0)));
  const Trajectory init = zero_input_initialization(s.game);
  for (auto _ : state) benchmark::DoNotOptimize(solve_olne_newton(s.game, s.basis, s.theta_true, init));
}
BENCHMARK(BM_NewtonForward)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_IbrForward(benchmark::State& state) {
  const Scenario& s = scenario(static_cast<int>(state.range(0)));
  const Trajectory init = zero_input_initialization(s.game);
  for (auto _ : state) benchmark::DoNotOptimize(solve_olne_ibr(s.game, s.basis, s.theta_true, init));
}
BENCHMARK(BM_IbrForward)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Presolve(benchmark::State& state) {
  const Scenario& s = scenario(2);
  const ObservationSequence obs = noisy(2, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(presolve(obs, s.game));
}
BENCHMARK(BM_Presolve)->Unit(benchmark::kMillisecond);

void BM_Inverse(benchmark::State& state) {
  const Scenario& s = scenario(2);
  const ObservationSequence obs = noisy(2, 0.1);
  const auto method = static_cast<EstimationMethod>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_inverse(method, obs, s.game, s.basis));
}
BENCHMARK(BM_Inverse)
    ->Arg(static_cast<int>(EstimationMethod::kJoint))
    ->Arg(static_cast<int>(EstimationMethod::kBaseline))
    ->Unit(benchmark::kMillisecond)
    ->Iterations(1);

}  // namespace
}  // namespace invgame

// system benchmark_main ships LTO bytecode from another compiler version
BENCHMARK_MAIN();
