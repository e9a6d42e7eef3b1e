#include <benchmark/benchmark.h>

#include "distillab/losses.hpp"
#include "distillab/rng.hpp"

using namespace distillab;

namespace {

Vec random_logits(int k, uint64_t seed) {
  Rng rng(seed);
  Vec z(static_cast<size_t>(k));
  for (double& v : z) v = rng.uniform(-4.0, 4.0);
  return z;
}

}  // namespace

static void BM_Softmax(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  LogitVector z{random_logits(k, 1)};
  Vec out(static_cast<size_t>(k));
  for (auto _ : state) {
    softmax_into(z.values, 1.0, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Softmax)->Arg(10)->Arg(100)->Arg(1000);

static void BM_CrossEntropy(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  ProbVector p = softmax(LogitVector{random_logits(k, 2)});
  LabelVector y = smooth_labels(0, 0.1, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_entropy(p, y));
  }
}
BENCHMARK(BM_CrossEntropy)->Arg(10)->Arg(1000);

static void BM_KlDivergence(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  ProbVector pt = softmax(LogitVector{random_logits(k, 3)});
  ProbVector ps = softmax(LogitVector{random_logits(k, 4)});
  for (auto _ : state) {
    benchmark::DoNotOptimize(kl_divergence(pt, ps));
  }
}
BENCHMARK(BM_KlDivergence)->Arg(10)->Arg(1000);

static void BM_DistillLoss(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  LogitVector zs{random_logits(k, 5)};
  LogitVector zt{random_logits(k, 6)};
  LabelVector y = smooth_labels(0, 0.0, k);
  DistillConfig cfg{0.5, 2.0, false};
  for (auto _ : state) {
    benchmark::DoNotOptimize(distill_loss(zs, zt, y, cfg));
  }
}
BENCHMARK(BM_DistillLoss)->Arg(10)->Arg(100);

static void BM_SmoothedLogisticCurve(benchmark::State& state) {
  Vec grid;
  for (int i = 0; i < 1000; ++i) grid.push_back(-10.0 + 0.02 * i);
  for (auto _ : state) {
    benchmark::DoNotOptimize(smoothed_logistic_curve(grid, 0.1));
  }
}
BENCHMARK(BM_SmoothedLogisticCurve);

BENCHMARK_MAIN();
