#include <benchmark/benchmark.h>

#include "discont/evaluation.hpp"

namespace {

using namespace discont;

Samples gaussian(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Samples s(n, dim);
  Rng rng(seed);
  for (auto& v : s.values) v = rng.normal();
  return s;
}

void BM_KsgEstimate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Samples x = gaussian(n, 32, 1), z = gaussian(n, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mi_ksg(x, z, 3));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsgEstimate)
    ->RangeMultiplier(2)
    ->Range(256, 2048)
    ->Complexity(benchmark::oNSquared)
    ->Unit(benchmark::kMillisecond);

void BM_FitPca(benchmark::State& state) {
  const Samples x = gaussian(512, 3072, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(x, 32));
}
BENCHMARK(BM_FitPca)->Unit(benchmark::kMillisecond);

}  // namespace
