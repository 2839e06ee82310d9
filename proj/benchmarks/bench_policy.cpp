#include <benchmark/benchmark.h>

#include "rubricrl/policy.hpp"
#include "rubricrl/rng.hpp"

namespace {

using namespace rubricrl;

void BM_SampleChecklist(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> logits(k);
  for (double& l : logits) l = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(sample_checklist_items(logits, rng));
}
BENCHMARK(BM_SampleChecklist)->Arg(4)->Arg(6)->Arg(12);

void BM_ChecklistLogProbGradient(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> logits(k);
  for (double& l : logits) l = rng.normal();
  const Checklist items{0, 1, 2};
  for (auto _ : state) benchmark::DoNotOptimize(checklist_logit_gradient(logits, items));
}
BENCHMARK(BM_ChecklistLogProbGradient)->Arg(4)->Arg(6)->Arg(12);

void BM_SampleTrajectory(benchmark::State& state) {
  DatasetSpec spec;
  const auto inst = generate_instance(spec, 0);
  const auto params = initial_params(spec.num_attributes, 3);
  const auto checklist = greedy_checklist(params, inst);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(sample_trajectory(params, inst, checklist, rng, 1.0));
}
BENCHMARK(BM_SampleTrajectory);

}  // namespace
