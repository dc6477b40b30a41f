#include <benchmark/benchmark.h>

#include "losslab/core_math.hpp"
#include "losslab/losses.hpp"
#include "losslab/rng.hpp"

using namespace losslab;

namespace {

LogitBatch make_batch(std::size_t B, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LogitBatch batch;
  batch.logits = Matrix(B, n);
  for (std::size_t i = 0; i < batch.logits.size(); ++i)
    batch.logits.data()[i] = rng.normal(0.0, 2.0);
  batch.labels.resize(B);
  for (auto& l : batch.labels) l = static_cast<int>(rng.below(n));
  return batch;
}

}  // namespace

static void BM_softmax(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> y(static_cast<std::size_t>(state.range(0)));
  for (double& v : y) v = rng.normal(0.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(softmax(y, 1.0));
}
BENCHMARK(BM_softmax)->Arg(10)->Arg(100)->Arg(1000);

static void BM_ce_loss(benchmark::State& state) {
  const auto batch = make_batch(128, static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(ce_loss(batch, 1.0));
}
BENCHMARK(BM_ce_loss)->Arg(10)->Arg(100);

static void BM_ln_loss(benchmark::State& state) {
  const auto batch = make_batch(128, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(ln_loss(batch, 0.04));
}
BENCHMARK(BM_ln_loss)->Arg(10)->Arg(100);

static void BM_dice_loss(benchmark::State& state) {
  const auto batch = make_batch(128, static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(dice_loss(batch));
}
BENCHMARK(BM_dice_loss)->Arg(10)->Arg(100);

static void BM_hem_loss(benchmark::State& state) {
  const auto batch = make_batch(128, static_cast<std::size_t>(state.range(0)), 5);
  const auto margins = MarginSpec::fixed(0.2);
  for (auto _ : state) benchmark::DoNotOptimize(hem_loss(batch, margins));
}
BENCHMARK(BM_hem_loss)->Arg(10)->Arg(100);

static void BM_mm_loss(benchmark::State& state) {
  const auto batch = make_batch(128, static_cast<std::size_t>(state.range(0)), 6);
  const auto margins = MarginSpec::fixed(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(mm_loss(batch, margins));
}
BENCHMARK(BM_mm_loss)->Arg(10)->Arg(100);
