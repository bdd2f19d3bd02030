#include <benchmark/benchmark.h>

#include "ace/eval.hpp"
#include "ace/synthetic.hpp"

static void BM_ClassifyNovel(benchmark::State& state) {
  static const auto data = ace::generate_synthetic_dataset(ace::SyntheticConfig{});
  static const auto enc = ace::make_toy_encoders(data.pretrained);
  static const auto novel = data.dataset.novel_vocab();
  static const auto test = data.dataset.samples(ace::Split::kTest, ace::ClassGroup::kNovel);
  const bool leaf = state.range(0) != 0;
  for (auto _ : state) {
    const auto bank = ace::column_bank(ace::label_columns(novel.actions(), novel, leaf), *enc.text);
    benchmark::DoNotOptimize(ace::classify_all(test, bank, *enc.video));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(test.size()));
}
BENCHMARK(BM_ClassifyNovel)->Arg(0)->Arg(1);

static void BM_Srt(benchmark::State& state) {
  static const auto data = ace::generate_synthetic_dataset(ace::SyntheticConfig{});
  static const auto enc = ace::make_toy_encoders(data.pretrained);
  static const auto novel = data.dataset.novel_vocab();
  static const auto test = data.dataset.samples(ace::Split::kTest, ace::ClassGroup::kNovel);
  ace::EvalConfig ec;
  for (auto _ : state) benchmark::DoNotOptimize(ace::srt(ec, enc, novel, test).mean.accuracy);
}
BENCHMARK(BM_Srt);
