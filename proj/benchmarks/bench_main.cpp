#include <benchmark/benchmark.h>

#include "merc/eig.hpp"
#include "merc/shared_branch.hpp"
#include "merc/trainer.hpp"

using namespace merc;

static void BM_SymmetricEig(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eig(a));
}
BENCHMARK(BM_SymmetricEig)->Arg(18)->Arg(36)->Arg(72)->Unit(benchmark::kMicrosecond);

static void BM_SharedGraph(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(shared::normalize_and_decompose(shared::build_adjacency(n, 5)));
}
BENCHMARK(BM_SharedGraph)->Arg(6)->Arg(12)->Unit(benchmark::kMicrosecond);

// One optimizer step on the default model over the toy dataset.
static void BM_TrainStep(benchmark::State& state) {
  Config c;
  c.steps = 1;
  const Dataset d = synth_generate(synth_spec(c));
  for (auto _ : state) benchmark::DoNotOptimize(train(c, d));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
  Config c;
  c.steps = 0;
  const Dataset d = synth_generate(synth_spec(c));
  const Checkpoint ck = train(c, d).checkpoint;
  const Model m = ck.to_model();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, d, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
