#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dga/dataset.hpp"
#include "dga/image_io.hpp"
#include "dga/model.hpp"
#include "dga/protocol.hpp"

namespace dga {

struct ProbeResult {
  std::string probe_set;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // correct / total
};

struct EvalReport {
  std::vector<ProbeResult> sets;
  double average = 0.0;  // unweighted mean over probe sets
  // confusion[true][predicted], summed over every probe set.
  std::vector<std::vector<std::size_t>> confusion;
};

// Logits of one sample.
using LogitsFn = std::function<Tensor<double>(const RGBDSample&)>;

// Rank-1 identification: a probe is correct iff the argmax of its logits
// (lowest index on ties) equals its identity. Throws ConfigError when a label
// or the logit width does not fit `num_classes`.
EvalReport rank1(const LogitsFn& logits, std::size_t num_classes, const ProtocolSplit& split,
                 std::span<const RGBDSample> samples);

template <typename T>
EvalReport rank1(const Model<T>& model, const ProtocolSplit& split,
                 std::span<const RGBDSample> samples);

template <typename T>
Tensor<T> predict_logits(const Model<T>& model, const RGBDSample& sample);

// `probe_set,correct,total,accuracy` rows followed by an `average` row whose
// counts are totals and whose accuracy is the mean of the set accuracies.
std::string eval_report_csv(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

// Min-max scales an M x M x 1 (or M x M) map to 0..255; a flat map becomes
// all 128. With `extent` > 0 the image is nearest-neighbour upsampled to
// extent x extent.
template <typename T>
Image attention_image(const Tensor<T>& attention, std::size_t extent = 0);

// Attention map of one sample as an 8-bit PGM. Throws ConfigError for a
// variant without attention.
template <typename T>
Image export_attention(const Model<T>& model, const RGBDSample& sample,
                       const std::filesystem::path& path, bool upsample = false);

// CSV with header `identity,e0,...`: one row per sample, the identity then the
// pre-logit embedding.
template <typename T>
void export_embeddings(const Model<T>& model, std::span<const RGBDSample> samples,
                       const std::filesystem::path& path);

}  // namespace dga
