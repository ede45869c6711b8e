#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dga/attention.hpp"
#include "dga/backbone.hpp"
#include "dga/key_values.hpp"
#include "dga/nn.hpp"

namespace dga {

// The proposed network and the comparison ladder built around it.
enum class ModelVariant {
  baseline,     // RGB stream only
  model_a,      // concatenated RGB + guidance features, 3-layer classifier
  model_b,      // bilinear pooling, no refinement
  model_c,      // dot pooling, no refinement
  model_d,      // dot pooling + refinement, no modality loss
  proposed,     // dot pooling + refinement + modality loss
  cross_modal,  // attention over both streams, single-layer classifier
};

std::string_view to_string(ModelVariant v);
ModelVariant parse_variant(std::string_view text);
const std::vector<ModelVariant>& all_variants();

// Modality loss and pooling mode each variant uses unless configured otherwise.
bool default_modality_loss(ModelVariant v);
PoolingMode default_pooling(ModelVariant v);

enum class Mode { train, eval };

struct ModelConfig {
  BackboneConfig backbone;
  PoolingConfig pooling;
  std::size_t classifier_hidden = 1024;
  std::size_t aux_hidden = 1024;
  std::size_t num_classes = 2;
  ModelVariant variant = ModelVariant::proposed;
  bool modality_loss = true;

  // Throws ConfigError on invalid extents or a variant/config inconsistency.
  void validate() const;

  bool uses_guidance() const { return variant != ModelVariant::baseline; }
  bool has_pooling() const;
  bool has_attention() const;

  // VGG-16 streams on 224 x 224 inputs with C = 64, K = 256.
  static ModelConfig full_scale(std::size_t num_classes,
                                ModelVariant variant = ModelVariant::proposed);
  // 64 x 64 inputs, blocks [8, 16, 32] with one conv each, C = 8, K = 16 and
  // 64-wide classifier and auxiliary layers.
  static ModelConfig toy(std::size_t num_classes, ModelVariant variant = ModelVariant::proposed);
};

// `model.*` keys.
void write_model_config(KeyValues& kv, const ModelConfig& cfg);
ModelConfig read_model_config(const KeyValues& kv);
// `init.*` keys.
void write_init_spec(KeyValues& kv, const InitSpec& init);
InitSpec read_init_spec(const KeyValues& kv);

// Shapes of the intermediate maps, computed from the configuration alone.
struct ModelShapes {
  Shape f_rgb;
  Shape f_guidance;
  Shape pooled;
  Shape attention;
  Shape embedding;
  Shape logits;
  std::size_t aux_rgb_input = 0;
  std::size_t aux_guidance_input = 0;
};
ModelShapes infer_shapes(const ModelConfig& cfg);

// Exact scalar parameter count including biases and auxiliary branches,
// computed without allocating the model.
std::size_t count_model_params(const ModelConfig& cfg);
std::size_t count_aux_branch_params(const ModelConfig& cfg, std::size_t input_width);

template <typename T>
struct ForwardOutput {
  Var<T> logits;
  std::optional<Var<T>> aux_rgb_logits;
  std::optional<Var<T>> aux_guidance_logits;
  std::optional<Var<T>> attention;  // M x M x 1
  Var<T> embedding;
  Var<T> f_rgb;
  std::vector<Var<T>> rgb_blocks;  // every RGB block output; the last is f_rgb
  std::optional<Var<T>> f_guidance;
  std::optional<Var<T>> pooled;
};

// flatten -> Dense(aux_hidden, tanh) -> Dense(num_classes).
template <typename T>
struct AuxBranch {
  Dense<T> hidden;
  Dense<T> out;

  AuxBranch(std::size_t in, std::size_t hidden_width, std::size_t classes, const InitSpec& init,
            const std::string& name);
  Var<T> forward(Tape<T>& tape, const Var<T>& feature_map) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out_params);
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg, InitSpec init = {});

  const ModelConfig& config() const noexcept { return cfg_; }
  const InitSpec& init() const noexcept { return init_; }

  // Full forward pass. `guidance` is ignored by the baseline. Auxiliary logits
  // are produced only in train mode with the modality loss enabled.
  ForwardOutput<T> forward(Tape<T>& tape, const Var<T>& rgb, const Var<T>& guidance,
                           Mode mode) const;
  ForwardOutput<T> forward(Tape<T>& tape, const Tensor<T>& rgb, const Tensor<T>& guidance,
                           Mode mode) const;

  // Classifier head of the attention variants applied to an explicit
  // attention map: logits from the attention-weighted sum of F_rgb.
  Var<T> classify_attended(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& attention,
                           Var<T>* embedding = nullptr) const;

  const Backbone<T>& backbone() const noexcept { return backbone_; }
  const std::optional<AttentionModule<T>>& attention_module() const noexcept {
    return attention_;
  }

  std::vector<NamedParam<T>> parameters();
  std::vector<ConstNamedParam<T>> parameters() const;
  std::size_t param_count() const;

 private:
  Var<T> run_classifier(Tape<T>& tape, const Var<T>& features, Var<T>& embedding) const;

  ModelConfig cfg_;
  InitSpec init_;
  Backbone<T> backbone_;
  std::optional<AttentionModule<T>> attention_;
  std::vector<Dense<T>> classifier_;
  std::optional<AuxBranch<T>> aux_rgb_;
  std::optional<AuxBranch<T>> aux_guidance_;
};

// Cross-entropy of an auxiliary head (rgb or guidance).
template <typename T>
Var<T> loss_identity(const Var<T>& logits, std::size_t label);

// Cross-entropy of the main (attention-refined) head.
template <typename T>
Var<T> loss_attention(const Var<T>& logits, std::size_t label);

template <typename T>
struct LossTerms {
  Var<T> total;
  std::optional<Var<T>> rgb;
  std::optional<Var<T>> guidance;
  Var<T> head;
};

// Sum of auxiliary and main losses when the modality loss is enabled, else the
// main head loss alone. Throws ConfigError when an auxiliary head is missing.
template <typename T>
LossTerms<T> loss_total(const ForwardOutput<T>& out, std::size_t label, bool modality_loss);

}  // namespace dga
