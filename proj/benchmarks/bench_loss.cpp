#include <benchmark/benchmark.h>

#include "ace/ace_loss.hpp"
#include "ace/synthetic.hpp"

namespace {

// One training batch of the default synthetic world.
struct World {
  ace::SyntheticData data;
  std::vector<ace::VideoSample> batch;
  ace::Vocabulary base;
  ace::EncoderPair enc;
};

}  // namespace

static World& world() {
  static World w = [] {
    auto data = ace::generate_synthetic_dataset(ace::SyntheticConfig{});
    auto train = data.dataset.samples(ace::Split::kTrain, ace::ClassGroup::kBase);
    train.resize(32);
    auto base = data.dataset.base_vocab();
    auto enc = ace::make_toy_encoders(data.pretrained);
    return World{std::move(data), std::move(train), std::move(base), std::move(enc)};
  }();
  return w;
}

static void BM_LossForward(benchmark::State& state) {
  auto& w = world();
  ace::LossOptions opt;
  ace::Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(ace::total_loss(w.batch, w.base, w.enc, rng, opt).l_total);
}
BENCHMARK(BM_LossForward);

static void BM_LossBackward(benchmark::State& state) {
  auto& w = world();
  ace::LossOptions opt;
  ace::Rng rng(1);
  for (auto _ : state) {
    auto g = ace::zero_loss_gradients(w.enc);
    benchmark::DoNotOptimize(ace::total_loss(w.batch, w.base, w.enc, rng, opt, &g).l_total);
  }
}
BENCHMARK(BM_LossBackward);
