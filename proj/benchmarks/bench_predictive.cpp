// Apache License, Version 2.0, refer to LICENSE.txt
#include <benchmark/benchmark.h>

#include <random>

#include "sdpm/niw.hpp"

using namespace sdpm;

namespace {

ComponentStats filled_stats(int p, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComponentStats stats(p);
  for (int i = 0; i < n; ++i) {
    Vector x(p);
    for (int j = 0; j < p; ++j) x(j) = normal(rng);
    stats.add(x);
  }
  return stats;
}

}  // namespace

static void mvt_logpdf_dim(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = normal(rng);
  Matrix scale = a * a.transpose() + Matrix::Identity(p, p);
  Vector x = Vector::Constant(p, 0.3), loc = Vector::Zero(p);

  for (auto _ : state) benchmark::DoNotOptimize(mvt_logpdf(x, 7.0, loc, scale));
}
BENCHMARK(mvt_logpdf_dim)->Arg(1)->Arg(10)->Arg(50);

static void predictive_existing_cached(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  auto prior = NiwPrior::defaults_for_dim(p);
  ComponentStats stats = filled_stats(p, 200, rng);
  Vector theta = Vector::Constant(p, 0.2);
  predictive_existing(theta, stats, prior);  // warm the cache

  for (auto _ : state) benchmark::DoNotOptimize(predictive_existing(theta, stats, prior));
}
BENCHMARK(predictive_existing_cached)->Arg(1)->Arg(10)->Arg(50);

static void predictive_existing_fresh(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  auto prior = NiwPrior::defaults_for_dim(p);
  ComponentStats stats = filled_stats(p, 200, rng);
  Vector theta = Vector::Constant(p, 0.2);

  for (auto _ : state) {
    stats.invalidate_cache();
    benchmark::DoNotOptimize(predictive_existing(theta, stats, prior));
  }
}
BENCHMARK(predictive_existing_fresh)->Arg(1)->Arg(10)->Arg(50);

static void stats_add_with_cache_update(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto prior = NiwPrior::defaults_for_dim(p);
  ComponentStats stats = filled_stats(p, 50, rng);
  Vector theta = Vector::Constant(p, 0.1);
  predictive_existing(theta, stats, prior);

  for (auto _ : state) {
    Vector x(p);
    for (int j = 0; j < p; ++j) x(j) = normal(rng);
    stats.add(x, prior, 1 << 30);
    benchmark::DoNotOptimize(stats);
  }
}
BENCHMARK(stats_add_with_cache_update)->Arg(10)->Arg(50);
