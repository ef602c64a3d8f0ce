#include "glmmgm/quadrature.hpp"

#include <benchmark/benchmark.h>

using namespace glmmgm;

static void BM_GhRule(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gh_rule(m));
}
BENCHMARK(BM_GhRule)->Arg(10)->Arg(25)->Arg(60);

static void BM_LogisticNormal(benchmark::State& state) {
  double eta = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(logistic_normal_integral(eta, 0.25));
    eta = eta > 3.0 ? -3.0 : eta + 0.01;
  }
}
BENCHMARK(BM_LogisticNormal);

static void BM_ZegerMean(benchmark::State& state) {
  double eta = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(zeger_mean(eta, 0.25));
    eta = eta > 3.0 ? -3.0 : eta + 0.01;
  }
}
BENCHMARK(BM_ZegerMean);
