#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dga/dataset.hpp"
#include "dga/model.hpp"
#include "dga/optim.hpp"

namespace dga {

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  std::optional<double> loss_rgb;
  std::optional<double> loss_guidance;
  double loss_attention = 0.0;  // main head
  double train_acc = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

// Index of the largest element; ties go to the lowest index.
template <typename T>
std::size_t argmax(const Tensor<T>& values);

// Image tensors of one sample, converted to the model's precision.
template <typename T>
struct SampleTensors {
  Tensor<T> rgb;
  Tensor<T> guidance;
  std::size_t label;
};

template <typename T>
std::vector<SampleTensors<T>> to_sample_tensors(std::span<const RGBDSample> samples);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch Adam training on the full loss of the model's variant. Each
// epoch visits one seeded permutation of the samples; the last batch may be
// short. Per-sample gradients are computed in parallel and summed in sample
// order, so results do not depend on the thread count.
template <typename T>
std::vector<EpochMetrics> train(Model<T>& model, std::span<const RGBDSample> samples,
                                const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Metrics CSV with header
// `epoch,lr,loss_total,loss_rgb,loss_guidance,loss_attention,train_acc`;
// absent losses are empty fields.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& history);
std::string metrics_csv(const std::vector<EpochMetrics>& history);

}  // namespace dga
