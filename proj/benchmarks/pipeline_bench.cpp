#include <benchmark/benchmark.h>

#include "losslab/eval.hpp"
#include "losslab/rng.hpp"
#include "losslab/trainer.hpp"

using namespace losslab;

static void BM_train_step_mnist_shape(benchmark::State& state) {
  const std::vector<int> widths = {784, 200, 200, 200, 10};
  MlpModel model = init_model(widths, 1);
  OptimizerConfig opt_cfg;
  opt_cfg.kind = OptimizerKind::Adam;
  opt_cfg.learning_rate = 1e-3;
  Optimizer opt(opt_cfg, model);

  Rng rng(2);
  Matrix inputs(128, 784);
  for (std::size_t i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.uniform();
  std::vector<int> labels(128);
  for (auto& l : labels) l = static_cast<int>(rng.below(10));

  LossSpec loss;
  loss.kind = LossKind::CrossEntropy;
  for (auto _ : state)
    benchmark::DoNotOptimize(train_step(model, opt, inputs, labels, loss));
}
BENCHMARK(BM_train_step_mnist_shape)->Unit(benchmark::kMillisecond);

static void BM_forward_mnist_shape(benchmark::State& state) {
  const std::vector<int> widths = {784, 200, 200, 200, 10};
  const MlpModel model = init_model(widths, 1);
  Rng rng(3);
  Matrix inputs(static_cast<std::size_t>(state.range(0)), 784);
  for (std::size_t i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, inputs));
}
BENCHMARK(BM_forward_mnist_shape)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_auroc(benchmark::State& state) {
  Rng rng(4);
  const auto count = static_cast<std::size_t>(state.range(0));
  std::vector<double> known(count), unknown(count);
  for (double& v : known) v = rng.uniform();
  for (double& v : unknown) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(auroc(known, unknown));
}
BENCHMARK(BM_auroc)->Arg(1000)->Arg(10000);
