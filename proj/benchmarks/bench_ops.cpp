#include <benchmark/benchmark.h>

#include "dga/autodiff.hpp"
#include "dga/ops.hpp"
#include "dga/random.hpp"

namespace {

dga::Tensor<float> filled(dga::Shape shape, std::uint64_t seed) {
  dga::Rng rng(seed);
  dga::Tensor<float> t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// 3x3 same-padded conv, H x H x C -> H x H x C.
void BM_Conv2dForward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto x = filled({h, h, c}, 1), k = filled({3, 3, c, c}, 2), b = filled({c}, 3);
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto y = dga::conv2d(tape.constant(x), tape.constant(k), tape.constant(b));
    benchmark::DoNotOptimize(y.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(h * h * c * c * 9));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 8})->Args({32, 16})->Args({28, 64});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto x = filled({h, h, c}, 1), k = filled({3, 3, c, c}, 2), b = filled({c}, 3);
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto kv = tape.variable(k);
    auto loss = dga::sum(dga::conv2d(tape.variable(x), kv, tape.variable(b)));
    auto grads = tape.backward(loss);
    benchmark::DoNotOptimize(&grads);
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 8})->Args({32, 16});

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled({n, n}, 4), b = filled({n, n}, 5);
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto y = dga::matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(y.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_Softmax(benchmark::State& state) {
  const auto x = filled({49, 1}, 6);
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto y = dga::softmax(tape.constant(x), 0);
    benchmark::DoNotOptimize(y.value().data().data());
  }
}
BENCHMARK(BM_Softmax);

}  // namespace
