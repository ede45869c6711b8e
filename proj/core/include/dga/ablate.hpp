#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dga/eval.hpp"
#include "dga/optim.hpp"

namespace dga {

struct AblationConfig {
  ModelConfig base;  // variant, pooling and modality loss are set per variant
  InitSpec init;     // seed replaced per run
  TrainConfig train; // seed replaced per run
  std::vector<ModelVariant> variants{ModelVariant::baseline, ModelVariant::model_a,
                                     ModelVariant::proposed};
  std::vector<std::uint64_t> seeds{0};
};

// Configuration of one (variant, seed) run of an ablation.
ModelConfig ablation_model_config(const ModelConfig& base, ModelVariant variant);

struct AblationRun {
  ModelVariant variant;
  std::uint64_t seed;
  EvalReport report;
};

struct AblationRow {
  ModelVariant variant;
  std::string probe_set;  // a probe set name or "average"
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation, 0 for one seed
  std::size_t seeds = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> rows;
};

using AblationProgress = std::function<void(const AblationRun&)>;

// Trains every (variant, seed) on the gallery of `split` and evaluates rank-1
// accuracy on its probe sets.
AblationResult ablate(const AblationConfig& cfg, std::span<const RGBDSample> samples,
                      const ProtocolSplit& split, const AblationProgress& progress = {});

// `variant,probe_set,mean_acc,std_acc,seeds`
std::string ablation_csv(const AblationResult& result);
void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result);

}  // namespace dga
