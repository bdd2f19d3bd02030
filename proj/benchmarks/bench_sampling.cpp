#include <benchmark/benchmark.h>

#include "ace/synthetic.hpp"
#include "ace/vocab.hpp"

static const ace::Vocabulary& vocab() {
  static const auto v = ace::generate_synthetic_dataset(ace::SyntheticConfig{}).dataset.vocab;
  return v;
}

static void BM_SamplePositives(benchmark::State& state) {
  ace::Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(ace::sample_positive_labels(vocab(), rng));
}
BENCHMARK(BM_SamplePositives);

static void BM_SampleShadows(benchmark::State& state) {
  ace::Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(ace::sample_shadow_negatives(vocab(), rng));
}
BENCHMARK(BM_SampleShadows);

static void BM_NegativePool(benchmark::State& state) {
  const auto& v = vocab();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(v.negative_pool(i));
    i = (i + 1) % v.size();
  }
}
BENCHMARK(BM_NegativePool);
