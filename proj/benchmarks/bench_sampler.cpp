#include <benchmark/benchmark.h>

#include "markovpg/gibbs.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/pg_sampler.hpp"
#include "markovpg/simulate.hpp"

using namespace markovpg;

static void BM_DrawPG1(benchmark::State& state) {
  Rng rng(1);
  const double c = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_pg1(c, rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DrawPG1)->Arg(0)->Arg(5)->Arg(20)->Arg(100);

static FitData bench_data(std::size_t steps) {
  ScenarioSpec spec;
  spec.steps = steps;
  const auto sc = make_scenario(spec);
  Rng rng(2);
  return simulate_sequences(sc, rng);
}

// One Gibbs sweep per benchmark iteration on the default J=3, N=2, H=2 study.
static void BM_GibbsSweep(benchmark::State& state) {
  const FitData d = bench_data(static_cast<std::size_t>(state.range(0)));
  SamplerConfig c;
  c.burn_in = 0;
  c.iterations = 1;
  c.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    c.seed += 1;
    benchmark::DoNotOptimize(run_chain(d, PriorSpec{}, c).draws.data());
  }
  state.counters["transitions"] = static_cast<double>(d.n_transitions());
}
BENCHMARK(BM_GibbsSweep)->Args({1000, 1})->Args({4000, 1})->Args({4000, 3})->Unit(benchmark::kMillisecond);

static void BM_DrawImputations(benchmark::State& state) {
  const FitData d = bench_data(4000);
  Rng rng(3);
  const auto probs = simulate_classification(d, 0.6, rng);
  for (auto _ : state) benchmark::DoNotOptimize(draw_imputations(probs, static_cast<std::size_t>(state.range(0)), 5).size());
}
BENCHMARK(BM_DrawImputations)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
