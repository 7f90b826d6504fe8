#include <benchmark/benchmark.h>

#include "discont/autograd.hpp"
#include "discont/ops.hpp"
#include "discont/rng.hpp"

namespace {

using namespace discont;

Tensor filled(Shape shape, std::uint64_t seed, bool grad = false) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_normal(t.values(), 0.0, 0.1);
  t.set_requires_grad(grad);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const Tensor x = filled({64, channels, 15, 15}, 1);
  const Tensor w = filled({channels * 2, channels, 3, 3}, 2);
  const Tensor b = filled({channels * 2}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 2));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Conv2dForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const Tensor x = filled({64, 64, 15, 15}, 1, true);
  const Tensor w = filled({128, 64, 3, 3}, 2, true);
  const Tensor b = filled({128}, 3, true);
  for (auto _ : state) {
    sum(conv2d(x, w, b, 2)).backward();
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_ConvTranspose2d(benchmark::State& state) {
  const Tensor x = filled({64, 128, 7, 7}, 1);
  const Tensor w = filled({128, 64, 3, 3}, 2);
  const Tensor b = filled({64}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv_transpose2d(x, w, b, 2));
}
BENCHMARK(BM_ConvTranspose2d)->Unit(benchmark::kMillisecond);

void BM_Dense(benchmark::State& state) {
  const Tensor x = filled({64, 512}, 1);
  const Tensor w = filled({512, 1024}, 2);
  const Tensor b = filled({1024}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(dense(x, w, b));
}
BENCHMARK(BM_Dense)->Unit(benchmark::kMicrosecond);

}  // namespace
