// Apache License, Version 2.0, refer to LICENSE.txt
#include <benchmark/benchmark.h>

#include "sdpm/samplers.hpp"
#include "sdpm/supermodel.hpp"

using namespace sdpm;

static void ingest_toy_stream(benchmark::State& state) {
  const int n_particles = static_cast<int>(state.range(0));
  const auto resampler = state.range(1) == 0 ? ResampleScheme::Multinomial
                                             : ResampleScheme::Systematic;
  auto batches = toy_batches(100, 5, {.proportional = true});
  std::int64_t samples = 0;
  for (const auto& b : batches) samples += b.n();

  for (auto _ : state) {
    DpmConfig cfg;
    cfg.n_particles = n_particles;
    cfg.mode = AllocationMode::Sample;
    cfg.resampler = resampler;
    cfg.seed = 11;
    Supermodel model(1, cfg);
    for (const auto& b : batches) model.ingest(b);
    benchmark::DoNotOptimize(model);
  }
  state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(ingest_toy_stream)
    ->Args({10, 0})
    ->Args({100, 0})
    ->Args({100, 1})
    ->Unit(benchmark::kMillisecond);

static void score_query_throughput(benchmark::State& state) {
  SimScenario s = SimScenario::case1_defaults();
  s.p = 10;
  s.n_experiments = 10;
  s.n_classes = 5;
  s.mcmc_draws = 100;
  s.seed = 3;
  auto batches = gen_case1(s);

  DpmConfig cfg;
  cfg.n_particles = static_cast<int>(state.range(0));
  cfg.mode = AllocationMode::Sample;
  cfg.seed = 13;
  Supermodel model(s.p, cfg);
  for (const auto& b : batches) model.ingest(b);

  std::vector<std::string> candidates = model.experiment_ids();
  candidates.pop_back();
  for (auto _ : state)
    benchmark::DoNotOptimize(model.score(batches.back(), candidates));
  state.SetItemsProcessed(state.iterations() * batches.back().n() * candidates.size());
}
BENCHMARK(score_query_throughput)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
