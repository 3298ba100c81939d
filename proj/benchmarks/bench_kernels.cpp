#include <benchmark/benchmark.h>

#include "dsc/augment.hpp"
#include "dsc/network.hpp"
#include "dsc/ops.hpp"
#include "dsc/optim.hpp"
#include "dsc/rng.hpp"

namespace {

using namespace dsc;

Tensor<float> random_tensor(Shape shape, uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int64_t hw = state.range(0);
  const int64_t channels = state.range(1);
  Tensor<float> x = random_tensor(Shape{1, hw, hw, channels}, 1);
  Tensor<float> k = random_tensor(Shape{3, 3, channels, channels * 2}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ops::conv2d<float>(x, k, nullptr, 2, Padding::kSame));
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_Conv2dForward)->Args({64, 8})->Args({128, 16})->Args({300, 3});

void BM_Conv2dBackward(benchmark::State& state) {
  const int64_t hw = state.range(0);
  Tensor<float> x = random_tensor(Shape{1, hw, hw, 8}, 1);
  Tensor<float> k = random_tensor(Shape{3, 3, 8, 16}, 2);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  for (auto _ : state) {
    Tape<float> tape;
    Tensor<float> y = ops::conv2d<float>(x, k, nullptr, 1, Padding::kSame, &tape);
    Tensor<float> loss = ops::sum(y, &tape);
    x.zero_grad();
    k.zero_grad();
    tape.backward(loss);
    benchmark::DoNotOptimize(x.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

void BM_DepthwiseForward(benchmark::State& state) {
  const int64_t hw = state.range(0);
  Tensor<float> x = random_tensor(Shape{1, hw, hw, 48}, 3);
  Tensor<float> k = random_tensor(Shape{3, 3, 48}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ops::depthwise_conv2d<float>(x, k, 1, Padding::kSame));
  }
}
BENCHMARK(BM_DepthwiseForward)->Arg(32)->Arg(75);

void BM_MBConvForward(benchmark::State& state) {
  ParameterStore<float> store;
  Rng init(5);
  MBConvBlock<float> block(store, init, "blk", 24, 32, 6, 3, 2, 6, true);
  Tensor<float> x = random_tensor(Shape{1, 38, 38, 24}, 6, 0.0, 1.0);
  Context<float> ctx;
  for (auto _ : state) {
    benchmark::DoNotOptimize(block.forward(ctx, x));
  }
}
BENCHMARK(BM_MBConvForward);

void BM_DeskNetworkForward(benchmark::State& state) {
  Network<float> net(network_preset("desk"), 7);
  Tensor<float> x = random_tensor(Shape{32, 64, 64, 3}, 8, 0.0, 1.0);
  Context<float> ctx;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(ctx, x));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_DeskNetworkForward);

void BM_FidelityForward(benchmark::State& state) {
  Network<float> net(network_preset("fidelity-b3"), 9);
  Tensor<float> x = random_tensor(Shape{1, 300, 300, 3}, 10, 0.0, 1.0);
  Context<float> ctx;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(ctx, x));
  }
}
BENCHMARK(BM_FidelityForward)->Unit(benchmark::kMillisecond);

void BM_DeskTrainStep(benchmark::State& state) {
  Network<float> net(network_preset("desk"), 11);
  Tensor<float> x = random_tensor(Shape{32, 64, 64, 3}, 12, 0.0, 1.0);
  std::vector<int> labels(32);
  Rng rng(13);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(5));
  AdamOptimizer<float> opt{AdamConfig{}};
  for (auto _ : state) {
    Tape<float> tape;
    Context<float> ctx{&tape, true};
    Tensor<float> probs = net.forward(ctx, x);
    Tensor<float> loss = scce_loss<float>(probs, labels, &tape);
    net.params().zero_grads();
    tape.backward(loss);
    opt.step(net.params());
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

void BM_AugmentBatch(benchmark::State& state) {
  Tensor<float> batch = random_tensor(Shape{32, 64, 64, 3}, 14, 0.0, 255.0);
  AugmentConfig cfg;
  Rng rng(15);
  for (auto _ : state) {
    benchmark::DoNotOptimize(augment_batch(batch, cfg, rng));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_AugmentBatch);

void BM_AdamStep(benchmark::State& state) {
  ParameterStore<float> store;
  Rng rng(16);
  Tensor<float> p(Shape{1536, 5}, true);
  for (float& v : p.values()) v = static_cast<float>(rng.uniform(-1, 1));
  store.add("w", p, true);
  for (float& g : store.find("w").grad()) {
    g = static_cast<float>(rng.uniform(-1, 1));
  }
  AdamOptimizer<float> opt{AdamConfig{}};
  for (auto _ : state) {
    opt.step(store);
    benchmark::DoNotOptimize(store.find("w").data());
  }
  state.SetItemsProcessed(state.iterations() * p.numel());
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
