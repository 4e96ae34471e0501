#include <map>

#include <benchmark/benchmark.h>

#include "specload/cache_sim.hpp"
#include "specload/load_sim.hpp"
#include "specload/predictor.hpp"
#include "specload/prefetch.hpp"
#include "specload/resource_graph.hpp"
#include "specload/synth.hpp"

using namespace specload;

namespace {

const Trace& trace(int visits) {
  static std::map<int, Trace> cache;
  auto it = cache.find(visits);
  if (it == cache.end()) {
    SynthParams p;
    p.visits = visits;
    it = cache.emplace(visits, generate_synthetic(p)).first;
  }
  return it->second;
}

void BM_Synth(benchmark::State& state) {
  SynthParams p;
  p.visits = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_synthetic(p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Synth)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_CacheReplay(benchmark::State& state) {
  const Trace& t = trace(5000);
  Capacity cap = state.range(0) ? Capacity::bytes(static_cast<std::uint64_t>(state.range(0)) << 20) : Capacity::infinite();
  for (auto _ : state) benchmark::DoNotOptimize(replay_cache_sim(t, cap));
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_CacheReplay)->Arg(6)->Arg(64)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const Trace& t = trace(5000);
  MetadataRepository repo;
  for (const auto& v : t.visits) repo.update(v);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(repo, t.visits[i].main.url));
    i = (i + 1) % t.visits.size();
  }
}
BENCHMARK(BM_Predict);

void BM_PredictorReplay(benchmark::State& state) {
  const Trace& t = trace(5000);
  for (auto _ : state) benchmark::DoNotOptimize(replay_predictor(t));
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_PredictorReplay)->Unit(benchmark::kMillisecond);

void BM_SimulatePage(benchmark::State& state) {
  const Trace& t = trace(1000);
  CacheState empty = CacheState::empty();
  NetworkParams net;
  std::size_t i = 0;
  const bool speculative = state.range(0) != 0;
  for (auto _ : state) {
    const PageVisit& v = t.visits[i];
    LoadMode mode = speculative ? LoadMode::speculative(oracle_prediction(v)) : LoadMode::legacy();
    benchmark::DoNotOptimize(simulate_page_timing(v, mode, empty, net));
    i = (i + 1) % t.visits.size();
  }
}
BENCHMARK(BM_SimulatePage)->Arg(0)->Arg(1);

void BM_PrefetchEval(benchmark::State& state) {
  const Trace& t = trace(5000);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_prefetch(t));
}
BENCHMARK(BM_PrefetchEval)->Unit(benchmark::kMillisecond);

void BM_RepoSerialize(benchmark::State& state) {
  const Trace& t = trace(5000);
  MetadataRepository repo;
  for (const auto& v : t.visits) repo.update(v);
  for (auto _ : state) benchmark::DoNotOptimize(serialize_repo(repo));
}
BENCHMARK(BM_RepoSerialize)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
