#include <benchmark/benchmark.h>

#include "dbd/augment.hpp"
#include "dbd/losses.hpp"
#include "dbd/triggers.hpp"

namespace {

using namespace dbd;

nn::ModelSpec bench_spec() {
  nn::ModelSpec spec;
  spec.in_channels = 3;
  spec.channels = {32, 64, 128, 256};
  spec.projection_dim = 128;
  spec.num_classes = 4;
  return spec;
}

nn::Batch<float> bench_batch(int n) {
  Rng rng(1);
  nn::Batch<float> batch(n, 3, 16, 16);
  for (float& v : batch.data) v = static_cast<float>(rng.uniform());
  return batch;
}

void forward_eval(benchmark::State& state) {
  nn::Model<float> model(bench_spec());
  model.init(Rng(2));
  const auto batch = bench_batch(static_cast<int>(state.range(0)));
  nn::Model<float>::ForwardCache cache;
  for (auto _ : state) {
    auto out = model.forward(batch, nn::Head::logits, nn::Mode::eval, cache);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(forward_eval)->Arg(32)->Arg(128)->Arg(256);

void forward_backward_train(benchmark::State& state) {
  nn::Model<float> model(bench_spec());
  model.init(Rng(3));
  const auto batch = bench_batch(static_cast<int>(state.range(0)));
  const int k = 4;
  std::vector<int> labels(static_cast<size_t>(state.range(0)));
  for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i) % k;
  nn::Model<float>::ForwardCache cache;
  for (auto _ : state) {
    const auto logits = model.forward(batch, nn::Head::logits, nn::Mode::train, cache);
    std::vector<float> d_logits;
    losses::ce_on_logits(logits, labels, k, -30.0, &d_logits);
    model.zero_grad();
    model.backward(d_logits, cache);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(forward_backward_train)->Arg(64)->Arg(256);

void strong_augment(benchmark::State& state) {
  const Dataset d = synth_dataset({4, 1, 16, "shapes"}, 5);
  const AugmentConfig cfg = AugmentConfig::strong_default();
  std::uint64_t salt = 0;
  for (auto _ : state) {
    Rng rng(salt++);
    auto out = augment(d.samples[0].image, cfg, rng);
    benchmark::DoNotOptimize(out.pixels.data());
  }
}
BENCHMARK(strong_augment);

void nt_xent_256(benchmark::State& state) {
  Rng rng(7);
  const int count = 256, dim = 128;
  std::vector<float> z(static_cast<size_t>(count) * dim);
  for (float& v : z) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    std::vector<float> dz;
    const double loss = losses::nt_xent(z, count, dim, 0.5, &dz);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(dz.data());
  }
}
BENCHMARK(nt_xent_256);

void wanet_warp(benchmark::State& state) {
  const Dataset d = synth_dataset({4, 1, 16, "shapes"}, 9);
  const WarpSpec spec{4, 0.5f, 0.0f, 11};
  for (auto _ : state) {
    auto out = wanet_transform(d.samples[0].image, spec, WarpMode::attack);
    benchmark::DoNotOptimize(out.pixels.data());
  }
}
BENCHMARK(wanet_warp);

}  // namespace

BENCHMARK_MAIN();
