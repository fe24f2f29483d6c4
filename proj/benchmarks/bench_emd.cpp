#include <benchmark/benchmark.h>

#include <random>

#include "tikzkit/reward.hpp"

namespace {

tikzkit::PatchEmbeddingSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> v(n * dim);
  for (auto& x : v) x = g(rng);
  return tikzkit::PatchEmbeddingSet(n, dim, std::move(v));
}

void BM_ExactEmd(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = tikzkit::cosine_distance_matrix(random_set(rng, n, 64), random_set(rng, n, 64));
  for (auto _ : state) benchmark::DoNotOptimize(tikzkit::solve_emd(d).cost);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExactEmd)->RangeMultiplier(2)->Range(4, 64)->Complexity();

void BM_EntropicEmd(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = tikzkit::cosine_distance_matrix(random_set(rng, n, 64), random_set(rng, n, 64));
  for (auto _ : state) benchmark::DoNotOptimize(tikzkit::solve_emd_entropic(d).cost);
}
BENCHMARK(BM_EntropicEmd)->RangeMultiplier(2)->Range(4, 64);

}  // namespace

BENCHMARK_MAIN();
