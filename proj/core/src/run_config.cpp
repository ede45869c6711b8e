#include "dga/run_config.hpp"

#include <fstream>

#include "dga/errors.hpp"

namespace dga {

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k{
      {"model.variant", "proposed",
       "baseline | model_a | model_b | model_c | model_d | proposed | cross_modal"},
      {"model.input_extent", "64", "input rasters are H x H"},
      {"model.rgb_channels", "3", "channels of the RGB raster"},
      {"model.guidance_channels", "1", "guidance stream input channels (1, or 3 to replicate)"},
      {"model.block_widths", "8,16,32", "output channels of each conv block"},
      {"model.convs_per_block", "1,1,1", "3x3 convolutions in each block (1 to 3)"},
      {"model.pooling", "auto", "dot | bilinear | auto (the variant's own mode)"},
      {"model.pool_c", "8", "C: channels of the pooled map"},
      {"model.pool_k", "16", "K: width of the shared refinement layer"},
      {"model.classifier_hidden", "64", "hidden width of the classifier"},
      {"model.aux_hidden", "64", "hidden width of the auxiliary heads"},
      {"model.modality_loss", "auto", "true | false | auto (the variant's default)"},
      {"init.scheme", "uniform_fan_in", "uniform_fan_in | normal"},
      {"init.sigma", "0.01", "standard deviation of the normal scheme"},
      {"init.seed", "0", "parameter initialization seed"},
      {"train.lr0", "0.003", "initial Adam learning rate"},
      {"train.decay", "0.9", "learning rate factor applied after every epoch"},
      {"train.batch_size", "5", "samples per Adam step"},
      {"train.epochs", "50", "passes over the training set"},
      {"train.seed", "0", "shuffling seed"},
      {"train.beta1", "0.9", "Adam first moment decay"},
      {"train.beta2", "0.999", "Adam second moment decay"},
      {"train.epsilon", "1e-08", "Adam denominator offset"},
      {"train.precision", "float", "float | double"},
      {"data.near", "", "near clipping plane; empty uses the manifest header"},
      {"data.far", "", "far clipping plane; empty uses the manifest header"},
      {"protocol.scheme", "neutral-gallery", "neutral-gallery | ratio:<r>:<seed>"},
      {"synth.ids", "10", "identities"},
      {"synth.per_id", "20", "samples per identity"},
      {"synth.extent", "64", "raster extent H"},
      {"synth.seed", "0", "generator seed"},
      {"synth.guidance", "depth", "depth | thermal"},
      {"synth.mix", "neutral:3,pose:2,expression:1,occlusion:1,illumination:1,time:1",
       "variation weights"},
      {"ablate.variants", "baseline,model_a,proposed", "variants to compare"},
      {"ablate.seeds", "0,1,2,3,4", "seeds per variant"},
  };
  return k;
}

namespace {

const RunConfig::Key* find_key(const std::string& name) {
  for (const auto& k : RunConfig::keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(pos, comma - pos);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_.set(k.name, k.default_value);
}

RunConfig RunConfig::parse(std::string_view text, std::string_view source) {
  RunConfig cfg;
  const KeyValues kv = KeyValues::parse(text, source);
  for (const auto& [key, value] : kv.entries()) cfg.set(key, value);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig cfg;
  const KeyValues kv = KeyValues::load(path);
  for (const auto& [key, value] : kv.entries()) cfg.set(key, value);
  return cfg;
}

void RunConfig::set(const std::string& key, std::string value) {
  if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_.set(key, std::move(value));
}

const std::string& RunConfig::get(const std::string& key) const {
  if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
  return values_.get(key);
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) {
    out += "# " + k.doc + " (default: " + (k.default_value.empty() ? "empty" : k.default_value) +
           ")\n";
    out += k.name + " = " + values_.get(k.name) + "\n";
  }
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  f << to_text();
  if (!f) throw IoError("cannot write " + path.string());
}

void RunConfig::validate() const {
  model_config(2);
  init_spec();
  train_config();
  precision();
  synth_config().validate();
  protocol();
  depth_planes();
  ablation_variants();
  ablation_seeds();
}

ModelConfig RunConfig::model_config(std::size_t num_classes) const {
  ModelConfig cfg;
  const KeyValues& kv = values_;
  cfg.variant = parse_variant(kv.get("model.variant"));
  cfg.num_classes = num_classes;
  cfg.backbone.input_extent = kv.get_size("model.input_extent");
  cfg.backbone.rgb_channels = kv.get_size("model.rgb_channels");
  cfg.backbone.guidance_channels = kv.get_size("model.guidance_channels");
  cfg.backbone.block_widths = kv.get_size_list("model.block_widths");
  cfg.backbone.convs_per_block = kv.get_size_list("model.convs_per_block");
  const std::string& pooling = kv.get("model.pooling");
  cfg.pooling.mode = pooling == "auto" ? default_pooling(cfg.variant) : parse_pooling_mode(pooling);
  cfg.pooling.c = kv.get_size("model.pool_c");
  cfg.pooling.k = kv.get_size("model.pool_k");
  cfg.classifier_hidden = kv.get_size("model.classifier_hidden");
  cfg.aux_hidden = kv.get_size("model.aux_hidden");
  cfg.modality_loss = kv.get("model.modality_loss") == "auto" ? default_modality_loss(cfg.variant)
                                                             : kv.get_bool("model.modality_loss");
  cfg.validate();
  return cfg;
}

InitSpec RunConfig::init_spec() const { return read_init_spec(values_); }

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.lr0 = values_.get_double("train.lr0");
  tc.decay = values_.get_double("train.decay");
  tc.batch_size = values_.get_size("train.batch_size");
  tc.epochs = values_.get_size("train.epochs");
  tc.seed = values_.get_u64("train.seed");
  tc.adam.beta1 = values_.get_double("train.beta1");
  tc.adam.beta2 = values_.get_double("train.beta2");
  tc.adam.epsilon = values_.get_double("train.epsilon");
  tc.validate();
  return tc;
}

Precision RunConfig::precision() const {
  const std::string& p = values_.get("train.precision");
  if (p == "float") return Precision::f32;
  if (p == "double") return Precision::f64;
  throw ConfigError("train.precision must be float or double, got '" + p + "'");
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig sc;
  sc.ids = values_.get_size("synth.ids");
  sc.per_id = values_.get_size("synth.per_id");
  sc.extent = values_.get_size("synth.extent");
  sc.seed = values_.get_u64("synth.seed");
  sc.guidance = parse_guidance_kind(values_.get("synth.guidance"));
  sc.mix = parse_variation_mix(values_.get("synth.mix"));
  return sc;
}

ProtocolScheme RunConfig::protocol() const {
  return parse_protocol_scheme(values_.get("protocol.scheme"));
}

std::optional<DepthPlanes> RunConfig::depth_planes() const {
  const bool has_near = !values_.get("data.near").empty();
  const bool has_far = !values_.get("data.far").empty();
  if (has_near != has_far) throw ConfigError("data.near and data.far must be set together");
  if (!has_near) return std::nullopt;
  DepthPlanes p{values_.get_double("data.near"), values_.get_double("data.far")};
  if (!(p.near < p.far)) throw ConfigError("data.near must be below data.far");
  return p;
}

std::vector<ModelVariant> RunConfig::ablation_variants() const {
  std::vector<ModelVariant> out;
  for (const auto& v : split_list(values_.get("ablate.variants"))) out.push_back(parse_variant(v));
  if (out.empty()) throw ConfigError("ablate.variants is empty");
  return out;
}

std::vector<std::uint64_t> RunConfig::ablation_seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(values_.get("ablate.seeds"))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("ablate.seeds: bad seed '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("ablate.seeds is empty");
  return out;
}

}  // namespace dga
