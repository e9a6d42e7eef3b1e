#include <benchmark/benchmark.h>

#include "distillab/metrics.hpp"
#include "distillab/rng.hpp"

using namespace distillab;

namespace {

GroupedProbs random_grouping(int k, int per_class, uint64_t seed) {
  Rng rng(seed);
  GroupedProbs g;
  g.num_classes = k;
  g.members.resize(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Vec p(static_cast<size_t>(k));
      double sum = 0.0;
      for (double& v : p) {
        v = rng.uniform(1e-4, 1.0);
        sum += v;
      }
      for (double& v : p) v /= sum;
      g.members[static_cast<size_t>(c)].push_back(std::move(p));
    }
  }
  return g;
}

}  // namespace

static void BM_IntraStabilityEq2(benchmark::State& state) {
  GroupedProbs g =
      random_grouping(static_cast<int>(state.range(0)), 100, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(intra_stability_eq2(g));
  }
}
BENCHMARK(BM_IntraStabilityEq2)->Arg(10)->Arg(50);

static void BM_IntraStabilityAlg1(benchmark::State& state) {
  GroupedProbs g =
      random_grouping(static_cast<int>(state.range(0)), 100, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(intra_stability_alg1(g));
  }
}
BENCHMARK(BM_IntraStabilityAlg1)->Arg(10)->Arg(50);

static void BM_StabilityReport(benchmark::State& state) {
  GroupedProbs g = random_grouping(10, 320, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_stability_report(g).stability_eq2);
  }
}
BENCHMARK(BM_StabilityReport);
