#include "glmmgm/conditional_means.hpp"
#include "glmmgm/fitter.hpp"
#include "glmmgm/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace glmmgm;

namespace {

Family family_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Family::Logistic : Family::NegBinomial;
}

ControlType control_of(const benchmark::State& state) {
  return state.range(1) == 0 ? ControlType::Gender : ControlType::Time;
}

Dataset dataset(Family fam, ControlType control) {
  return generate_dataset(SimDesign::defaults(fam, Baseline::Bernoulli, control), 1).data;
}

}  // namespace

static void BM_MarginalLoglik(benchmark::State& state) {
  const Family fam = family_of(state);
  const Dataset d = dataset(fam, control_of(state));
  const ModelSpec spec{fam, 4, true};
  const FittedModel f = fit(d, spec);
  for (auto _ : state) benchmark::DoNotOptimize(marginal_loglik(d, spec, f.params));
  state.SetItemsProcessed(state.iterations() * d.num_subjects());
}
BENCHMARK(BM_MarginalLoglik)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMicrosecond);

static void BM_SubjectScores(benchmark::State& state) {
  const Family fam = family_of(state);
  const Dataset d = dataset(fam, control_of(state));
  const ModelSpec spec{fam, 4, true};
  const FittedModel f = fit(d, spec);
  for (auto _ : state) benchmark::DoNotOptimize(subject_scores(d, spec, f.params));
}
BENCHMARK(BM_SubjectScores)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMicrosecond);

static void BM_Fit(benchmark::State& state) {
  const Family fam = family_of(state);
  const Dataset d = dataset(fam, control_of(state));
  for (auto _ : state) benchmark::DoNotOptimize(fit(d, ModelSpec{fam, 4, true}));
}
BENCHMARK(BM_Fit)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

static void BM_PredictionCovariance(benchmark::State& state) {
  const Dataset d = dataset(Family::Logistic, ControlType::Time);
  const FittedModel f = fit(d, ModelSpec{Family::Logistic, 4, true});
  for (auto _ : state) {
    const PredictionStructure st(d, f);
    benchmark::DoNotOptimize(prediction_covariance(st, d, 0));
  }
}
BENCHMARK(BM_PredictionCovariance)->Unit(benchmark::kMicrosecond);
