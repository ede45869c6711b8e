#include "dga/model.hpp"

#include "dga/ops.hpp"

namespace dga {

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::baseline: return "baseline";
    case ModelVariant::model_a: return "model_a";
    case ModelVariant::model_b: return "model_b";
    case ModelVariant::model_c: return "model_c";
    case ModelVariant::model_d: return "model_d";
    case ModelVariant::proposed: return "proposed";
    case ModelVariant::cross_modal: return "cross_modal";
  }
  return "unknown";
}

const std::vector<ModelVariant>& all_variants() {
  static const std::vector<ModelVariant> variants{
      ModelVariant::baseline, ModelVariant::model_a,  ModelVariant::model_b,
      ModelVariant::model_c,  ModelVariant::model_d,  ModelVariant::proposed,
      ModelVariant::cross_modal};
  return variants;
}

ModelVariant parse_variant(std::string_view text) {
  for (ModelVariant v : all_variants())
    if (to_string(v) == text) return v;
  throw ConfigError("unknown model variant '" + std::string(text) + "'");
}

bool default_modality_loss(ModelVariant v) {
  return v == ModelVariant::model_b || v == ModelVariant::model_c || v == ModelVariant::proposed;
}

PoolingMode default_pooling(ModelVariant v) {
  return v == ModelVariant::model_b ? PoolingMode::bilinear : PoolingMode::dot;
}

bool ModelConfig::has_pooling() const {
  return variant != ModelVariant::baseline && variant != ModelVariant::model_a;
}

bool ModelConfig::has_attention() const {
  return variant == ModelVariant::model_d || variant == ModelVariant::proposed ||
         variant == ModelVariant::cross_modal;
}

void ModelConfig::validate() const {
  backbone.validate();
  pooling.validate();
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (classifier_hidden == 0 || aux_hidden == 0) {
    throw ConfigError("classifier and auxiliary widths must be positive");
  }
  const std::string name(to_string(variant));
  if (variant == ModelVariant::model_d && modality_loss) {
    throw ConfigError("model_d is defined without the modality loss");
  }
  if (variant == ModelVariant::proposed && !modality_loss) {
    throw ConfigError("proposed requires the modality loss");
  }
  if (variant == ModelVariant::baseline && modality_loss) {
    throw ConfigError("baseline has no guidance stream for a modality loss");
  }
  if (variant == ModelVariant::model_b && pooling.mode != PoolingMode::bilinear) {
    throw ConfigError("model_b requires bilinear pooling");
  }
  if ((variant == ModelVariant::model_c || variant == ModelVariant::model_d ||
       variant == ModelVariant::proposed) &&
      pooling.mode != PoolingMode::dot) {
    throw ConfigError(name + " requires dot pooling");
  }
}

ModelConfig ModelConfig::full_scale(std::size_t num_classes, ModelVariant variant) {
  ModelConfig cfg;
  cfg.num_classes = num_classes;
  cfg.variant = variant;
  cfg.modality_loss = default_modality_loss(variant);
  cfg.pooling.mode = default_pooling(variant);
  return cfg;
}

ModelConfig ModelConfig::toy(std::size_t num_classes, ModelVariant variant) {
  ModelConfig cfg = full_scale(num_classes, variant);
  cfg.backbone.input_extent = 64;
  cfg.backbone.block_widths = {8, 16, 32};
  cfg.backbone.convs_per_block = {1, 1, 1};
  cfg.pooling.c = 8;
  cfg.pooling.k = 16;
  cfg.classifier_hidden = 64;
  cfg.aux_hidden = 64;
  return cfg;
}

void write_model_config(KeyValues& kv, const ModelConfig& cfg) {
  kv.set("model.variant", std::string(to_string(cfg.variant)));
  kv.set("model.num_classes", std::to_string(cfg.num_classes));
  kv.set("model.input_extent", std::to_string(cfg.backbone.input_extent));
  kv.set("model.rgb_channels", std::to_string(cfg.backbone.rgb_channels));
  kv.set("model.guidance_channels", std::to_string(cfg.backbone.guidance_channels));
  kv.set("model.block_widths", join_sizes(cfg.backbone.block_widths));
  kv.set("model.convs_per_block", join_sizes(cfg.backbone.convs_per_block));
  kv.set("model.pooling", std::string(to_string(cfg.pooling.mode)));
  kv.set("model.pool_c", std::to_string(cfg.pooling.c));
  kv.set("model.pool_k", std::to_string(cfg.pooling.k));
  kv.set("model.classifier_hidden", std::to_string(cfg.classifier_hidden));
  kv.set("model.aux_hidden", std::to_string(cfg.aux_hidden));
  kv.set("model.modality_loss", cfg.modality_loss ? "true" : "false");
}

ModelConfig read_model_config(const KeyValues& kv) {
  ModelConfig cfg;
  cfg.variant = parse_variant(kv.get("model.variant"));
  cfg.num_classes = kv.get_size("model.num_classes");
  cfg.backbone.input_extent = kv.get_size("model.input_extent");
  cfg.backbone.rgb_channels = kv.get_size("model.rgb_channels");
  cfg.backbone.guidance_channels = kv.get_size("model.guidance_channels");
  cfg.backbone.block_widths = kv.get_size_list("model.block_widths");
  cfg.backbone.convs_per_block = kv.get_size_list("model.convs_per_block");
  cfg.pooling.mode = parse_pooling_mode(kv.get("model.pooling"));
  cfg.pooling.c = kv.get_size("model.pool_c");
  cfg.pooling.k = kv.get_size("model.pool_k");
  cfg.classifier_hidden = kv.get_size("model.classifier_hidden");
  cfg.aux_hidden = kv.get_size("model.aux_hidden");
  cfg.modality_loss = kv.get_bool("model.modality_loss");
  cfg.validate();
  return cfg;
}

void write_init_spec(KeyValues& kv, const InitSpec& init) {
  kv.set("init.scheme", std::string(to_string(init.scheme)));
  kv.set("init.sigma", format_double(init.sigma));
  kv.set("init.seed", std::to_string(init.seed));
}

InitSpec read_init_spec(const KeyValues& kv) {
  InitSpec init;
  init.scheme = parse_init_scheme(kv.get("init.scheme"));
  init.sigma = kv.get_double("init.sigma");
  init.seed = kv.get_u64("init.seed");
  return init;
}

namespace {

std::size_t classifier_input_width(const ModelConfig& cfg) {
  const std::size_t phi = cfg.backbone.rgb_width();
  const std::size_t v = cfg.backbone.guidance_width();
  switch (cfg.variant) {
    case ModelVariant::baseline:
    case ModelVariant::model_d:
    case ModelVariant::proposed:
      return phi;
    case ModelVariant::model_a:
    case ModelVariant::cross_modal:
      return phi + v;
    case ModelVariant::model_b:
    case ModelVariant::model_c:
      return cfg.pooling.c;
  }
  return phi;
}

// (in, out, activation) for each classifier layer.
struct LayerPlan {
  std::size_t in, out;
  DenseActivation act;
};

std::vector<LayerPlan> classifier_plan(const ModelConfig& cfg) {
  const std::size_t in = classifier_input_width(cfg);
  const std::size_t h = cfg.classifier_hidden;
  const std::size_t n = cfg.num_classes;
  switch (cfg.variant) {
    case ModelVariant::model_a:
      return {{in, h, DenseActivation::tanh},
              {h, h, DenseActivation::tanh},
              {h, n, DenseActivation::none}};
    case ModelVariant::cross_modal:
      return {{in, n, DenseActivation::none}};
    default:
      return {{in, h, DenseActivation::none}, {h, n, DenseActivation::none}};
  }
}

}  // namespace

ModelShapes infer_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.backbone.feature_extent();
  ModelShapes s;
  s.f_rgb = {m, m, cfg.backbone.rgb_width()};
  if (cfg.uses_guidance()) s.f_guidance = {m, m, cfg.backbone.guidance_width()};
  if (cfg.has_pooling()) s.pooled = {m, m, cfg.pooling.c};
  if (cfg.has_attention()) s.attention = {m, m, 1};
  const auto plan = classifier_plan(cfg);
  s.embedding = {plan.size() == 1 ? plan.front().in : plan[plan.size() - 2].out};
  s.logits = {cfg.num_classes};
  if (cfg.modality_loss) {
    s.aux_rgb_input = m * m * cfg.backbone.rgb_width();
    s.aux_guidance_input = m * m * cfg.backbone.guidance_width();
  }
  return s;
}

std::size_t count_aux_branch_params(const ModelConfig& cfg, std::size_t input_width) {
  return Dense<float>::count(input_width, cfg.aux_hidden) +
         Dense<float>::count(cfg.aux_hidden, cfg.num_classes);
}

std::size_t count_model_params(const ModelConfig& cfg) {
  cfg.validate();
  const BackboneConfig& b = cfg.backbone;
  std::size_t n = ConvStream<float>::count(b, b.rgb_channels);
  if (cfg.uses_guidance()) n += ConvStream<float>::count(b, b.guidance_channels);
  if (cfg.has_pooling()) {
    n += AttentionModule<float>::count(cfg.pooling, b.rgb_width(), b.guidance_width(),
                                       cfg.has_attention());
  }
  for (const auto& layer : classifier_plan(cfg)) n += Dense<float>::count(layer.in, layer.out);
  if (cfg.modality_loss) {
    const ModelShapes s = infer_shapes(cfg);
    n += count_aux_branch_params(cfg, s.aux_rgb_input);
    n += count_aux_branch_params(cfg, s.aux_guidance_input);
  }
  return n;
}

template <typename T>
AuxBranch<T>::AuxBranch(std::size_t in, std::size_t hidden_width, std::size_t classes,
                        const InitSpec& init, const std::string& name)
    : hidden(in, hidden_width, DenseActivation::tanh, init, name + ".fc1"),
      out(hidden_width, classes, DenseActivation::none, init, name + ".fc2") {}

template <typename T>
Var<T> AuxBranch<T>::forward(Tape<T>& tape, const Var<T>& feature_map) const {
  Var<T> flat = reshape(feature_map, Shape{feature_map.value().size()});
  return out.forward(tape, hidden.forward(tape, flat));
}

template <typename T>
void AuxBranch<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out_params) {
  hidden.collect(prefix + ".fc1", out_params);
  out.collect(prefix + ".fc2", out_params);
}

template <typename T>
Model<T>::Model(ModelConfig cfg, InitSpec init)
    : cfg_((cfg.validate(), std::move(cfg))),
      init_(init),
      backbone_(cfg_.backbone, init_, cfg_.uses_guidance()) {
  const BackboneConfig& b = cfg_.backbone;
  if (cfg_.has_pooling()) {
    attention_.emplace(cfg_.pooling, b.rgb_width(), b.guidance_width(), cfg_.has_attention(),
                       init_);
  }
  const auto plan = classifier_plan(cfg_);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    classifier_.emplace_back(plan[i].in, plan[i].out, plan[i].act, init_,
                             "classifier.fc" + std::to_string(i + 1));
  }
  if (cfg_.modality_loss) {
    const ModelShapes s = infer_shapes(cfg_);
    aux_rgb_.emplace(s.aux_rgb_input, cfg_.aux_hidden, cfg_.num_classes, init_, "aux_rgb");
    aux_guidance_.emplace(s.aux_guidance_input, cfg_.aux_hidden, cfg_.num_classes, init_,
                          "aux_guidance");
  }
}

template <typename T>
Var<T> Model<T>::run_classifier(Tape<T>& tape, const Var<T>& features, Var<T>& embedding) const {
  Var<T> h = features;
  embedding = features;
  for (std::size_t i = 0; i < classifier_.size(); ++i) {
    if (i + 1 == classifier_.size()) embedding = h;
    h = classifier_[i].forward(tape, h);
  }
  return h;
}

template <typename T>
Var<T> Model<T>::classify_attended(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& attention,
                                   Var<T>* embedding) const {
  Var<T> emb;
  Var<T> logits = run_classifier(tape, spatial_sum(mul(f_rgb, attention)), emb);
  if (embedding) *embedding = emb;
  return logits;
}

template <typename T>
ForwardOutput<T> Model<T>::forward(Tape<T>& tape, const Var<T>& rgb, const Var<T>& guidance,
                                   Mode mode) const {
  ForwardOutput<T> out;
  out.rgb_blocks = backbone_.rgb_blocks(tape, rgb);
  out.f_rgb = out.rgb_blocks.back();
  if (cfg_.uses_guidance()) out.f_guidance = backbone_.extract_guidance(tape, guidance);
  if (attention_) out.pooled = attention_->pool(tape, out.f_rgb, *out.f_guidance);
  if (cfg_.has_attention()) out.attention = attention_->attend(tape, *out.pooled);

  switch (cfg_.variant) {
    case ModelVariant::baseline:
      out.logits = run_classifier(tape, spatial_mean(out.f_rgb), out.embedding);
      break;
    case ModelVariant::model_a:
      out.logits = run_classifier(
          tape, concat_last<T>({spatial_mean(out.f_rgb), spatial_mean(*out.f_guidance)}),
          out.embedding);
      break;
    case ModelVariant::model_b:
    case ModelVariant::model_c:
      out.logits = run_classifier(tape, spatial_mean(*out.pooled), out.embedding);
      break;
    case ModelVariant::model_d:
    case ModelVariant::proposed:
      out.logits = classify_attended(tape, out.f_rgb, *out.attention, &out.embedding);
      break;
    case ModelVariant::cross_modal:
      out.logits = run_classifier(tape,
                                  concat_last<T>({spatial_sum(mul(out.f_rgb, *out.attention)),
                                                  spatial_sum(mul(*out.f_guidance,
                                                                  *out.attention))}),
                                  out.embedding);
      break;
  }

  if (mode == Mode::train && cfg_.modality_loss) {
    out.aux_rgb_logits = aux_rgb_->forward(tape, out.f_rgb);
    out.aux_guidance_logits = aux_guidance_->forward(tape, *out.f_guidance);
  }
  return out;
}

template <typename T>
ForwardOutput<T> Model<T>::forward(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& guidance,
                                   Mode mode) const {
  Var<T> r = tape.constant(rgb);
  Var<T> g = cfg_.uses_guidance() ? tape.constant(guidance) : r;
  return forward(tape, r, g, mode);
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() {
  std::vector<NamedParam<T>> out;
  backbone_.collect(out);
  if (attention_) attention_->collect(out);
  for (std::size_t i = 0; i < classifier_.size(); ++i)
    classifier_[i].collect("classifier.fc" + std::to_string(i + 1), out);
  if (aux_rgb_) aux_rgb_->collect("aux_rgb", out);
  if (aux_guidance_) aux_guidance_->collect("aux_guidance", out);
  return out;
}

template <typename T>
std::vector<ConstNamedParam<T>> Model<T>::parameters() const {
  std::vector<ConstNamedParam<T>> out;
  for (auto& p : const_cast<Model&>(*this).parameters()) out.push_back({p.name, p.tensor});
  return out;
}

template <typename T>
std::size_t Model<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

template <typename T>
Var<T> loss_identity(const Var<T>& logits, std::size_t label) {
  return cross_entropy(logits, label);
}

template <typename T>
Var<T> loss_attention(const Var<T>& logits, std::size_t label) {
  return cross_entropy(logits, label);
}

template <typename T>
LossTerms<T> loss_total(const ForwardOutput<T>& out, std::size_t label, bool modality_loss) {
  LossTerms<T> terms;
  terms.head = loss_attention(out.logits, label);
  if (!modality_loss) {
    terms.total = terms.head;
    return terms;
  }
  if (!out.aux_rgb_logits || !out.aux_guidance_logits) {
    throw ConfigError("modality loss requires both auxiliary heads (forward in train mode)");
  }
  terms.rgb = loss_identity(*out.aux_rgb_logits, label);
  terms.guidance = loss_identity(*out.aux_guidance_logits, label);
  terms.total = add(add(*terms.rgb, *terms.guidance), terms.head);
  return terms;
}

template struct AuxBranch<float>;
template struct AuxBranch<double>;
template class Model<float>;
template class Model<double>;
template Var<float> loss_identity(const Var<float>&, std::size_t);
template Var<double> loss_identity(const Var<double>&, std::size_t);
template Var<float> loss_attention(const Var<float>&, std::size_t);
template Var<double> loss_attention(const Var<double>&, std::size_t);
template LossTerms<float> loss_total(const ForwardOutput<float>&, std::size_t, bool);
template LossTerms<double> loss_total(const ForwardOutput<double>&, std::size_t, bool);

}  // namespace dga
