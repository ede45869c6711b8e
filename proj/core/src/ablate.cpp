#include "dga/ablate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dga/errors.hpp"
#include "dga/train.hpp"

namespace dga {

ModelConfig ablation_model_config(const ModelConfig& base, ModelVariant variant) {
  ModelConfig cfg = base;
  cfg.variant = variant;
  cfg.modality_loss = default_modality_loss(variant);
  cfg.pooling.mode = default_pooling(variant);
  cfg.validate();
  return cfg;
}

AblationResult ablate(const AblationConfig& cfg, std::span<const RGBDSample> samples,
                      const ProtocolSplit& split, const AblationProgress& progress) {
  if (cfg.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (cfg.variants.empty()) throw ConfigError("ablation needs at least one variant");

  std::vector<RGBDSample> gallery;
  gallery.reserve(split.gallery.size());
  for (std::size_t i : split.gallery) {
    if (i >= samples.size()) throw DataError("gallery index out of range");
    gallery.push_back(samples[i]);
  }

  AblationResult result;
  for (ModelVariant variant : cfg.variants) {
    const ModelConfig model_cfg = ablation_model_config(cfg.base, variant);
    std::vector<EvalReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
      InitSpec init = cfg.init;
      init.seed = seed;
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      Model<float> model(model_cfg, init);
      train(model, gallery, tc);
      AblationRun run{variant, seed, rank1(model, split, samples)};
      if (progress) progress(run);
      reports.push_back(run.report);
      result.runs.push_back(std::move(run));
    }

    const std::size_t n = reports.size();
    auto summarize = [&](const std::string& name, auto&& accuracy_of) {
      double mean = 0.0;
      for (const auto& r : reports) mean += accuracy_of(r);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& r : reports) var += (accuracy_of(r) - mean) * (accuracy_of(r) - mean);
      const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
      result.rows.push_back({variant, name, mean, sd, n});
    };
    for (std::size_t s = 0; s < reports.front().sets.size(); ++s) {
      summarize(reports.front().sets[s].probe_set,
                [s](const EvalReport& r) { return r.sets[s].accuracy; });
    }
    summarize("average", [](const EvalReport& r) { return r.average; });
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::string out = "variant,probe_set,mean_acc,std_acc,seeds\n";
  char buf[256];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%zu\n",
                  std::string(to_string(r.variant)).c_str(), r.probe_set.c_str(), r.mean_acc,
                  r.std_acc, r.seeds);
    out += buf;
  }
  return out;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result) {
  std::ofstream f(path, std::ios::trunc);
  f << ablation_csv(result);
  if (!f) throw IoError("cannot write " + path.string());
}

}  // namespace dga
