#include <benchmark/benchmark.h>

#include "dga/model.hpp"
#include "dga/random.hpp"

namespace {

struct Inputs {
  dga::Tensor<float> rgb{dga::Shape{64, 64, 3}};
  dga::Tensor<float> guidance{dga::Shape{64, 64, 1}};
  Inputs() {
    dga::Rng rng(9);
    for (float& v : rgb.data()) v = static_cast<float>(rng.uniform());
    for (float& v : guidance.data()) v = static_cast<float>(rng.uniform());
  }
};

void BM_ToyForward(benchmark::State& state) {
  const auto variant = static_cast<dga::ModelVariant>(state.range(0));
  const dga::Model<float> model(dga::ModelConfig::toy(10, variant));
  const Inputs in;
  state.SetLabel(std::string(dga::to_string(variant)));
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto out = model.forward(tape, in.rgb, in.guidance, dga::Mode::eval);
    benchmark::DoNotOptimize(out.logits.value().data().data());
  }
}
BENCHMARK(BM_ToyForward)
    ->Arg(static_cast<int>(dga::ModelVariant::baseline))
    ->Arg(static_cast<int>(dga::ModelVariant::model_a))
    ->Arg(static_cast<int>(dga::ModelVariant::proposed))
    ->Unit(benchmark::kMicrosecond);

// Forward, total loss and backward of one training sample.
void BM_ToyTrainStep(benchmark::State& state) {
  const dga::Model<float> model(dga::ModelConfig::toy(10));
  const Inputs in;
  for (auto _ : state) {
    dga::Tape<float> tape;
    auto out = model.forward(tape, in.rgb, in.guidance, dga::Mode::train);
    auto loss = dga::loss_total(out, 3, true);
    auto grads = tape.backward(loss.total);
    benchmark::DoNotOptimize(&grads);
  }
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMicrosecond);

void BM_CountFullScaleParams(benchmark::State& state) {
  const auto cfg = dga::ModelConfig::full_scale(509);
  for (auto _ : state) benchmark::DoNotOptimize(dga::count_model_params(cfg));
}
BENCHMARK(BM_CountFullScaleParams);

}  // namespace
