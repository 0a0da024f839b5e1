#include <benchmark/benchmark.h>

#include <factorsde/estimator.hpp>
#include <factorsde/matrixcalc.hpp>
#include <factorsde/sde_sim.hpp>

#include "example_model.hpp"

namespace {

using namespace factorsde;

void BM_Simulate(benchmark::State& state) {
  const SimConfig config = testing::example_sim(state.range(0), 1.0 / static_cast<double>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(10000);

void BM_RealisedCov(benchmark::State& state) {
  const SamplePath path = simulate(testing::example_sim(state.range(0), 1e-3, 7));
  for (auto _ : state) benchmark::DoNotOptimize(realised_cov(path));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RealisedCov)->Arg(1000)->Arg(100000);

void BM_Duplication(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(duplication(state.range(0)));
}
BENCHMARK(BM_Duplication)->Arg(6)->Arg(20);

RealisedCov example_q() {
  return realised_cov(simulate(testing::example_sim(1000, 1e-3, 11)));
}

void BM_Contrast(benchmark::State& state) {
  const RealisedCov q = example_q();
  const ParamVector params = testing::example_params();
  for (auto _ : state) benchmark::DoNotOptimize(contrast(q, params));
}
BENCHMARK(BM_Contrast);

void BM_ContrastGrad(benchmark::State& state) {
  const RealisedCov q = example_q();
  const ParamVector params = testing::example_params();
  for (auto _ : state) benchmark::DoNotOptimize(contrast_grad(q, params));
}
BENCHMARK(BM_ContrastGrad);

void BM_Fit(benchmark::State& state) {
  const RealisedCov q = example_q();
  ModelSpec spec = testing::example_spec(1000, 1e-3);
  spec.k = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(fit(q, spec, std::nullopt, FitOptions{}));
}
BENCHMARK(BM_Fit)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
