#include <benchmark/benchmark.h>

#include <random>

#include "tender/nn/model.hpp"
#include "tender/nn/ops.hpp"

using namespace tender::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = d(gen);
  return t;
}

// args: spatial size, input channels, filters
void BM_Conv2dForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto f = static_cast<std::size_t>(state.range(2));
  const auto x = random_tensor({8, c, size, size}, 1);
  const auto k = random_tensor({f, c, 3, 3}, 2);
  const Tensor b({f}, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, k, b, 1, Padding::Same));
  state.SetItemsProcessed(state.iterations() * 8 * size * size * c * f * 9);
}
BENCHMARK(BM_Conv2dForward)->Args({32, 8, 16})->Args({16, 32, 64})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto x = random_tensor({8, 16, 32, 32}, 1);
  const auto k = random_tensor({32, 16, 3, 3}, 2);
  const auto dy = random_tensor({8, 32, 32, 32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(x, k, dy, 1, Padding::Same));
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_SeparableForward(benchmark::State& state) {
  const auto x = random_tensor({8, 32, 32, 32}, 1);
  const auto dw = random_tensor({32, 1, 3, 3}, 2);
  const auto pw = random_tensor({64, 32, 1, 1}, 3);
  const Tensor b({64}, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(separable_conv2d_forward(x, dw, pw, b, 1, Padding::Same));
}
BENCHMARK(BM_SeparableForward)->Unit(benchmark::kMillisecond);

// One optimizer-free training step: forward, loss, backward on a batch of 32.
void BM_TrainStep(benchmark::State& state) {
  const auto arch = static_cast<Arch>(state.range(0));
  Model model(build_model(arch, 64, WidthPreset::Tiny));
  model.initialize(1);
  const auto x = random_tensor(model.input_shape(32), 4);
  std::vector<int> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) {
    model.zero_grad();
    Tensor dlogits;
    const auto logits = model.forward(x);
    benchmark::DoNotOptimize(model.loss(logits, labels, &dlogits));
    model.backward(dlogits);
  }
  state.SetLabel(std::string(to_string(arch)) + "-tiny-64");
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Arch::ResNet))
    ->Arg(static_cast<int>(Arch::GoogLeNet))
    ->Arg(static_cast<int>(Arch::Xception))
    ->Unit(benchmark::kMillisecond);

void BM_InferPaper224(benchmark::State& state) {
  const auto arch = static_cast<Arch>(state.range(0));
  Model model(build_model(arch, 224, WidthPreset::Paper));
  model.initialize(1);
  const auto x = random_tensor(model.input_shape(1), 5);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
  state.SetLabel(std::string(to_string(arch)) + "-paper-224");
}
BENCHMARK(BM_InferPaper224)
    ->Arg(static_cast<int>(Arch::ResNet))
    ->Arg(static_cast<int>(Arch::GoogLeNet))
    ->Arg(static_cast<int>(Arch::Xception))
    ->Unit(benchmark::kMillisecond);

}  // namespace
