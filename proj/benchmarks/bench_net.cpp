#include <benchmark/benchmark.h>

#include "distillab/binarize.hpp"
#include "distillab/net.hpp"
#include "distillab/rng.hpp"

using namespace distillab;

namespace {

Matrix random_batch(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  Matrix batch(n, dim);
  for (double& v : batch.data) v = rng.uniform(-1.0, 1.0);
  return batch;
}

Model bench_model() {
  const int hidden[] = {64, 64};
  return init_model(NetworkSpec::mlp(32, hidden, 10, Activation::kRelu), 1);
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  Model model = bench_model();
  Matrix batch = random_batch(static_cast<int>(state.range(0)), 32, 2);
  for (auto _ : state) {
    ForwardRecord record = forward(model, batch);
    benchmark::DoNotOptimize(record.logits().data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(256)->Arg(2048);

static void BM_ForwardBackward(benchmark::State& state) {
  Model model = bench_model();
  const int n = static_cast<int>(state.range(0));
  Matrix batch = random_batch(n, 32, 3);
  Matrix upstream(n, 10, 0.01);
  for (auto _ : state) {
    ForwardRecord record = forward(model, batch);
    Gradients grads = backward(model, record, upstream);
    benchmark::DoNotOptimize(grads.weights[0].data.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(256);

static void BM_SgdStep(benchmark::State& state) {
  Model model = bench_model();
  SgdState opt = SgdState::zeros_like(model);
  Gradients grads;
  for (const LayerSpec& layer : model.spec.layers) {
    grads.weights.emplace_back(layer.out_dim, layer.in_dim, 1e-4);
    grads.biases.emplace_back(static_cast<size_t>(layer.out_dim), 1e-4);
  }
  TrainConfig cfg;
  for (auto _ : state) {
    sgd_step(model, grads, opt, cfg, 0);
  }
}
BENCHMARK(BM_SgdStep);

static void BM_BinarizeWeights(benchmark::State& state) {
  Rng rng(4);
  Matrix w(static_cast<int>(state.range(0)), 64);
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(binarize_weights(w).data.data());
  }
}
BENCHMARK(BM_BinarizeWeights)->Arg(64)->Arg(256);
