#include <benchmark/benchmark.h>

#include "rubricrl/pipeline.hpp"
#include "rubricrl/rl.hpp"

namespace {

using namespace rubricrl;

void BM_TrainStep(benchmark::State& state) {
  DatasetSpec spec;
  const auto batch = generate_range(spec, 0, static_cast<std::size_t>(state.range(0)));
  auto params = initial_params(spec.num_attributes, 1);
  TrainConfig cfg;
  Rng rng(2);
  auto opt = make_optimizer({}, cfg.clip.learning_rate);
  for (auto _ : state) params = train_step(params, batch, cfg, rng, *opt).params;
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32);

void BM_Evaluate(benchmark::State& state) {
  DatasetSpec spec;
  const auto data = generate_range(spec, 0, 256);
  const auto params = initial_params(spec.num_attributes, 1);
  const auto mode = static_cast<JudgeMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(params, data, mode).overall);
  state.SetLabel(std::string(to_string(mode)));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Evaluate)->Arg(static_cast<int>(JudgeMode::DeltaRubric))->Arg(static_cast<int>(JudgeMode::NoRubric));

}  // namespace
