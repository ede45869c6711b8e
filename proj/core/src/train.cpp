#include "dga/train.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "dga/ops.hpp"
#include "dga/parallel.hpp"
#include "dga/random.hpp"

namespace dga {

template <typename T>
std::size_t argmax(const Tensor<T>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

template <typename T>
std::vector<SampleTensors<T>> to_sample_tensors(std::span<const RGBDSample> samples) {
  std::vector<SampleTensors<T>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({s.rgb.template cast<T>(), s.guidance.template cast<T>(), s.identity});
  }
  return out;
}

namespace {

template <typename T>
struct SampleResult {
  std::vector<Tensor<T>> grads;
  double total = 0.0, rgb = 0.0, guidance = 0.0, head = 0.0;
  bool correct = false;
};

template <typename T>
SampleResult<T> run_sample(const Model<T>& model, const std::vector<ConstNamedParam<T>>& params,
                           const SampleTensors<T>& s) {
  Tape<T> tape;
  ForwardOutput<T> out = model.forward(tape, s.rgb, s.guidance, Mode::train);
  LossTerms<T> loss = loss_total(out, s.label, model.config().modality_loss);
  GradStore<T> grads = tape.backward(loss.total);

  SampleResult<T> r;
  r.total = loss.total.value().item();
  r.head = loss.head.value().item();
  if (loss.rgb) r.rgb = loss.rgb->value().item();
  if (loss.guidance) r.guidance = loss.guidance->value().item();
  r.correct = argmax(out.logits.value()) == s.label;
  r.grads.reserve(params.size());
  for (const auto& p : params) {
    const Tensor<T>* g = grads.find(*p.tensor);
    r.grads.push_back(g ? *g : Tensor<T>(p.tensor->shape(), T{0}));
  }
  return r;
}

}  // namespace

template <typename T>
std::vector<EpochMetrics> train(Model<T>& model, std::span<const RGBDSample> samples,
                                const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw DataError("cannot train on an empty dataset");
  for (const auto& s : samples) {
    if (s.identity >= model.config().num_classes) {
      throw DataError("label " + std::to_string(s.identity) + " out of range for " +
                      std::to_string(model.config().num_classes) + " classes");
    }
  }
  const auto data = to_sample_tensors<T>(samples);
  auto named = model.parameters();
  std::vector<Tensor<T>*> params;
  for (auto& p : named) params.push_back(p.tensor);
  const auto const_params = std::as_const(model).parameters();

  Adam<T> adam(cfg.adam);
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5348554646ULL));
  const std::size_t workers = std::max<std::size_t>(1, worker_count());
  const bool modality = model.config().modality_loss;

  std::vector<std::size_t> order(data.size());
  std::vector<EpochMetrics> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    const double lr = lr_schedule(cfg, epoch);
    double sum_total = 0, sum_rgb = 0, sum_guidance = 0, sum_head = 0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor<T>> acc;
      acc.reserve(params.size());
      for (const Tensor<T>* p : params) acc.emplace_back(p->shape(), T{0});

      // Waves of `workers` samples bound the memory held in per-sample gradients.
      for (std::size_t wave = start; wave < end; wave += workers) {
        const std::size_t wave_end = std::min(end, wave + workers);
        std::vector<SampleResult<T>> results(wave_end - wave);
        parallel_for(results.size(), [&](std::size_t i) {
          results[i] = run_sample(model, const_params, data[order[wave + i]]);
        });
        for (const auto& r : results) {
          for (std::size_t k = 0; k < acc.size(); ++k) {
            T* a = acc[k].data().data();
            const T* g = r.grads[k].data().data();
            for (std::size_t j = 0; j < acc[k].size(); ++j) a[j] += g[j];
          }
          sum_total += r.total;
          sum_rgb += r.rgb;
          sum_guidance += r.guidance;
          sum_head += r.head;
          correct += r.correct ? 1 : 0;
        }
      }

      const T inv = T{1} / static_cast<T>(end - start);
      std::vector<const Tensor<T>*> grads;
      for (auto& a : acc) {
        for (T& v : a.data()) v *= inv;
        grads.push_back(&a);
      }
      adam.step(params, grads, lr);
    }

    const double n = static_cast<double>(data.size());
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.loss_total = sum_total / n;
    m.loss_attention = sum_head / n;
    if (modality) {
      m.loss_rgb = sum_rgb / n;
      m.loss_guidance = sum_guidance / n;
    }
    m.train_acc = static_cast<double>(correct) / n;
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,lr,loss_total,loss_rgb,loss_guidance,loss_attention,train_acc\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& m : history) {
    out += std::to_string(m.epoch) + ',' + num(m.lr) + ',' + num(m.loss_total) + ',' +
           (m.loss_rgb ? num(*m.loss_rgb) : "") + ',' +
           (m.loss_guidance ? num(*m.loss_guidance) : "") + ',' + num(m.loss_attention) + ',' +
           num(m.train_acc) + '\n';
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write metrics " + path.string());
  out << metrics_csv(history);
}

template std::size_t argmax(const Tensor<float>&);
template std::size_t argmax(const Tensor<double>&);
template std::vector<SampleTensors<float>> to_sample_tensors(std::span<const RGBDSample>);
template std::vector<SampleTensors<double>> to_sample_tensors(std::span<const RGBDSample>);
template std::vector<EpochMetrics> train(Model<float>&, std::span<const RGBDSample>,
                                         const TrainConfig&, const EpochCallback&);
template std::vector<EpochMetrics> train(Model<double>&, std::span<const RGBDSample>,
                                         const TrainConfig&, const EpochCallback&);

}  // namespace dga
