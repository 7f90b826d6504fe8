#include <benchmark/benchmark.h>

#include "discont/autograd.hpp"
#include "discont/trainer.hpp"

namespace {

using namespace discont;

const FactorDataset& dataset() {
  static const FactorDataset ds = oversample_with_jitter(generate_color_position({}), 2, 0);
  return ds;
}

TrainConfig config(std::size_t batch) {
  TrainConfig cfg;
  cfg.model.image_size = 32;
  cfg.batch_size = batch;
  return cfg;
}

void BM_TrainStep(benchmark::State& state) {
  const auto cfg = config(static_cast<std::size_t>(state.range(0)));
  auto model = ModelParams::initialize(cfg.model, 1);
  OptimizerState opt;
  std::vector<std::size_t> idx(cfg.batch_size);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor batch = gather(dataset(), idx).images;
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(batch, model, opt, cfg, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.batch_size));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EncodeEval(benchmark::State& state) {
  const auto cfg = config(64);
  auto model = ModelParams::initialize(cfg.model, 1);
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor batch = gather(dataset(), idx).images;
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(encode(batch, model, Mode::Eval, nullptr));
}
BENCHMARK(BM_EncodeEval)->Unit(benchmark::kMillisecond);

void BM_ComposeAugmentations(benchmark::State& state) {
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor batch = gather(dataset(), idx).images;
  const AugmentationSpec spec;
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(compose_augmentations(batch, spec, rng));
}
BENCHMARK(BM_ComposeAugmentations)->Unit(benchmark::kMillisecond);

void BM_CheckpointEncode(benchmark::State& state) {
  Checkpoint ck;
  ck.model = ModelParams::initialize(config(64).model, 1);
  for (auto _ : state) benchmark::DoNotOptimize(encode_checkpoint(ck));
}
BENCHMARK(BM_CheckpointEncode)->Unit(benchmark::kMillisecond);

}  // namespace
