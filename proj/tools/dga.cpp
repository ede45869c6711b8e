// dga: command-line front end for training, evaluation, ablation, synthesis
// and exports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dga/ablate.hpp"
#include "dga/checkpoint.hpp"
#include "dga/errors.hpp"
#include "dga/eval.hpp"
#include "dga/gradcheck.hpp"
#include "dga/run_config.hpp"
#include "dga/synth.hpp"
#include "dga/train.hpp"

namespace fs = std::filesystem;
using namespace dga;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool config_required = false) {
  cmd->add_option("--config", f.config, "key = value config file")
      ->check(CLI::ExistingFile)
      ->required(config_required);
  cmd->add_option("--set", f.sets, "override one config key (key=value), repeatable");
}

// defaults < --config < --set < dedicated flags
RunConfig assemble(const ConfigFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t");
      const auto e = t.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Dataset load_data(const std::string& manifest, const RunConfig& cfg) {
  Dataset ds = load_manifest(manifest, cfg.depth_planes());
  if (ds.manifest.remapped) {
    std::cerr << "note: identities relabeled to 0.." << ds.num_classes() - 1 << " (";
    for (std::size_t i = 0; i < ds.manifest.original_ids.size(); ++i)
      std::cerr << (i ? ", " : "") << ds.manifest.original_ids[i] << "->" << i;
    std::cerr << ")\n";
  }
  return ds;
}

template <typename T>
void run_training(const RunConfig& cfg, const Dataset& ds, const std::vector<RGBDSample>& train_set,
                  const fs::path& out) {
  Model<T> model(cfg.model_config(ds.num_classes()), cfg.init_spec());
  std::printf("model %s, %zu parameters, %zu training samples\n",
              std::string(to_string(model.config().variant)).c_str(), model.param_count(),
              train_set.size());
  const auto history = train(model, train_set, cfg.train_config(), [](const EpochMetrics& m) {
    std::printf("epoch %3zu  lr %.3g  loss %.5f  acc %.4f\n", m.epoch, m.lr, m.loss_total,
                m.train_acc);
    std::fflush(stdout);
  });
  write_metrics_csv(out / "metrics.csv", history);
  KeyValues extra;
  std::vector<std::size_t> ids = ds.manifest.original_ids;
  extra.set("data.original_ids", join_sizes(ids));
  write_checkpoint(out / "model.ckpt", model, extra);
}

int cmd_train(const ConfigFlags& f, const std::string& data, const std::string& out,
              const std::optional<std::string>& protocol) {
  RunConfig cfg = assemble(f);
  if (protocol) cfg.set("protocol.scheme", *protocol);
  cfg.validate();
  const Dataset ds = load_data(data, cfg);
  std::vector<RGBDSample> train_set;
  if (protocol) {
    for (std::size_t i : split_protocol(ds.manifest.entries, cfg.protocol()).gallery)
      train_set.push_back(ds.samples[i]);
  } else {
    train_set = ds.samples;
  }
  const fs::path dir(out);
  ensure_dir(dir);
  cfg.save(dir / "config.txt");
  if (cfg.precision() == Precision::f64) {
    run_training<double>(cfg, ds, train_set, dir);
  } else {
    run_training<float>(cfg, ds, train_set, dir);
  }
  std::printf("wrote %s\n", (dir / "model.ckpt").string().c_str());
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& protocol,
             const std::string& out, const ConfigFlags& f) {
  RunConfig cfg = assemble(f);
  cfg.set("protocol.scheme", protocol);
  const Model<float> model = read_checkpoint<float>(model_path);
  const Dataset ds = load_data(data, cfg);
  if (ds.num_classes() != model.config().num_classes) {
    throw ConfigError("model has " + std::to_string(model.config().num_classes) +
                      " classes but the data has " + std::to_string(ds.num_classes()));
  }
  const ProtocolSplit split = split_protocol(ds.manifest.entries, cfg.protocol());
  const EvalReport report = rank1(model, split, ds.samples);
  std::cout << eval_report_csv(report);
  if (!out.empty()) write_eval_report(out, report);
  return kOk;
}

int cmd_ablate(const ConfigFlags& f, const std::string& data, const std::string& out) {
  const RunConfig cfg = assemble(f);
  cfg.validate();
  const Dataset ds = load_data(data, cfg);
  const ProtocolSplit split = split_protocol(ds.manifest.entries, cfg.protocol());
  AblationConfig ac;
  ModelConfig base = cfg.model_config(ds.num_classes());
  ac.base = base;
  ac.init = cfg.init_spec();
  ac.train = cfg.train_config();
  ac.variants = cfg.ablation_variants();
  ac.seeds = cfg.ablation_seeds();
  const fs::path dir(out);
  ensure_dir(dir);
  cfg.save(dir / "config.txt");
  const AblationResult result = ablate(ac, ds.samples, split, [](const AblationRun& run) {
    std::printf("%s seed %llu: average %.4f\n", std::string(to_string(run.variant)).c_str(),
                static_cast<unsigned long long>(run.seed), run.report.average);
    std::fflush(stdout);
  });
  write_ablation_csv(dir / "ablation.csv", result);
  std::cout << ablation_csv(result);
  return kOk;
}

struct SynthFlags {
  std::string out;
  std::optional<std::size_t> ids, per_id, extent;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> guidance, mix;
};

int cmd_synth(const ConfigFlags& f, const SynthFlags& s) {
  RunConfig cfg = assemble(f);
  if (s.ids) cfg.set("synth.ids", std::to_string(*s.ids));
  if (s.per_id) cfg.set("synth.per_id", std::to_string(*s.per_id));
  if (s.extent) cfg.set("synth.extent", std::to_string(*s.extent));
  if (s.seed) cfg.set("synth.seed", std::to_string(*s.seed));
  if (s.guidance) cfg.set("synth.guidance", *s.guidance);
  if (s.mix) cfg.set("synth.mix", *s.mix);
  const SynthConfig sc = cfg.synth_config();
  sc.validate();
  const SynthSummary summary = synth_generate(sc, s.out);
  std::printf("wrote %zu samples, manifest %s\n", summary.samples,
              summary.manifest.string().c_str());
  return kOk;
}

int cmd_gradcheck(double eps, std::size_t entries, std::uint64_t seed, double tolerance) {
  GradcheckConfig gc;
  gc.eps = eps;
  gc.entries_per_tensor = entries;
  gc.seed = seed;
  const GradcheckReport r = run_gradcheck(gc);
  for (const auto& w : r.worst) {
    std::printf("%-12s %-30s rel %.3e\n", std::string(to_string(w.variant)).c_str(),
                w.parameter.c_str(), w.rel_error);
  }
  std::printf("entries checked %zu, replaced (non-smooth) %zu\n", r.entries_checked,
              r.entries_nonsmooth);
  std::printf("max relative error %.6e\n", r.max_rel_error);
  return r.max_rel_error < tolerance ? kOk : kRuntime;
}

int cmd_export_attention(const std::string& model_path, const std::string& data,
                         std::size_t index, const std::string& out, bool upsample,
                         const ConfigFlags& f) {
  const RunConfig cfg = assemble(f);
  const Model<float> model = read_checkpoint<float>(model_path);
  const Dataset ds = load_data(data, cfg);
  if (index >= ds.samples.size()) {
    throw ConfigError("--index " + std::to_string(index) + " outside " +
                      std::to_string(ds.samples.size()) + " samples");
  }
  const Image img = export_attention(model, ds.samples[index], out, upsample);
  std::printf("wrote %zu x %zu attention map to %s\n", img.width, img.height, out.c_str());
  return kOk;
}

int cmd_export_embeddings(const std::string& model_path, const std::string& data,
                          const std::string& out, const ConfigFlags& f) {
  const RunConfig cfg = assemble(f);
  const Model<float> model = read_checkpoint<float>(model_path);
  const Dataset ds = load_data(data, cfg);
  export_embeddings(model, ds.samples, out);
  std::printf("wrote %zu embeddings to %s\n", ds.samples.size(), out.c_str());
  return kOk;
}

int cmd_count_params(const ConfigFlags& f, const std::string& scale,
                     const std::optional<std::string>& variant, std::size_t classes) {
  RunConfig cfg = assemble(f);
  if (variant) cfg.set("model.variant", *variant);
  const ModelConfig mc = scale == "full"
                             ? ModelConfig::full_scale(classes, parse_variant(cfg.get("model.variant")))
                             : cfg.model_config(classes);
  const ModelShapes s = infer_shapes(mc);
  std::printf("variant %s\n", std::string(to_string(mc.variant)).c_str());
  std::printf("F_rgb %s  F_guidance %s\n", to_string(s.f_rgb).c_str(),
              to_string(s.f_guidance).c_str());
  if (!s.pooled.empty()) std::printf("pooled %s\n", to_string(s.pooled).c_str());
  if (!s.attention.empty()) std::printf("attention %s\n", to_string(s.attention).c_str());
  std::printf("parameters %zu\n", count_model_params(mc));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-guided attention for multimodal face identification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  ConfigFlags cf;

  auto* train = app.add_subcommand("train", "train a model on a manifest");
  std::string data, out;
  std::optional<std::string> train_protocol;
  add_config_flags(train, cf, true);
  train->add_option("--data", data, "manifest.tsv")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--protocol", train_protocol,
                    "train on this protocol's gallery instead of every sample");

  auto* eval = app.add_subcommand("eval", "rank-1 identification on probe sets");
  std::string model_path, protocol = "neutral-gallery", report;
  add_config_flags(eval, cf);
  eval->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "manifest.tsv")->required();
  eval->add_option("--protocol", protocol, "neutral-gallery | ratio:<r>:<seed>")->required();
  eval->add_option("--out", report, "write the report CSV here");

  auto* abl = app.add_subcommand("ablate", "train and evaluate several variants over seeds");
  add_config_flags(abl, cf);
  abl->add_option("--data", data, "manifest.tsv")->required();
  abl->add_option("--out", out, "output directory")->required();

  auto* syn = app.add_subcommand("synth", "generate a synthetic RGB-D identity dataset");
  SynthFlags sf;
  add_config_flags(syn, cf);
  syn->add_option("--out", sf.out, "output directory")->required();
  syn->add_option("--ids", sf.ids, "identities")->required();
  syn->add_option("--per-id", sf.per_id, "samples per identity")->required();
  syn->add_option("--seed", sf.seed, "generator seed")->required();
  syn->add_option("--extent", sf.extent, "raster extent");
  syn->add_option("--guidance", sf.guidance, "depth | thermal");
  syn->add_option("--mix", sf.mix, "variation weights, e.g. neutral:3,pose:2");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite (toy, 64-bit)");
  double eps = 1e-5, tolerance = 1e-4;
  std::size_t entries = 6;
  std::uint64_t gc_seed = 0;
  gc->add_option("--eps", eps, "central difference step")->capture_default_str();
  gc->add_option("--entries", entries, "seeded entries per tensor (0 = all)")
      ->capture_default_str();
  gc->add_option("--seed", gc_seed, "input and entry seed")->capture_default_str();
  gc->add_option("--tolerance", tolerance, "exit 1 at or above this error")
      ->capture_default_str();

  auto* ea = app.add_subcommand("export-attention", "write one sample's attention map as PGM");
  std::size_t index = 0;
  bool upsample = false;
  add_config_flags(ea, cf);
  ea->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  ea->add_option("--data", data, "manifest.tsv")->required();
  ea->add_option("--index", index, "sample index in the manifest")->capture_default_str();
  ea->add_option("--out", out, "output .pgm")->required();
  ea->add_flag("--upsample", upsample, "nearest-neighbour upsample to the input extent");

  auto* ee = app.add_subcommand("export-embeddings", "write pre-logit embeddings as CSV");
  add_config_flags(ee, cf);
  ee->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  ee->add_option("--data", data, "manifest.tsv")->required();
  ee->add_option("--out", out, "output .csv")->required();

  auto* cp = app.add_subcommand("count-params", "print feature shapes and parameter count");
  std::string scale = "toy";
  std::optional<std::string> variant;
  std::size_t classes = 509;
  add_config_flags(cp, cf);
  cp->add_option("--scale", scale, "toy (config) | full (VGG-16, 224 x 224)")
      ->check(CLI::IsMember({"toy", "full"}))
      ->capture_default_str();
  cp->add_option("--variant", variant, "model variant");
  cp->add_option("--classes", classes, "number of identities")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(cf, data, out, train_protocol);
    if (*eval) return cmd_eval(model_path, data, protocol, report, cf);
    if (*abl) return cmd_ablate(cf, data, out);
    if (*syn) return cmd_synth(cf, sf);
    if (*gc) return cmd_gradcheck(eps, entries, gc_seed, tolerance);
    if (*ea) return cmd_export_attention(model_path, data, index, out, upsample, cf);
    if (*ee) return cmd_export_embeddings(model_path, data, out, cf);
    if (*cp) return cmd_count_params(cf, scale, variant, classes);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
