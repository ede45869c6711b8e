#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "dga/nn.hpp"

namespace dga {

enum class PoolingMode { dot, bilinear };

std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(std::string_view text);

struct PoolingConfig {
  PoolingMode mode = PoolingMode::dot;
  std::size_t c = 64;   // projected width of both streams
  std::size_t k = 256;  // width of the shared refinement layer

  void validate() const;
};

// tanh(F_rgb W1) * tanh(F_g W2), per position and per channel: M x M x C.
// `w_rgb` and `w_guidance` must carry tanh activations.
template <typename T>
Var<T> pool_dot(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& f_guidance,
                const Dense<T>& w_rgb, const Dense<T>& w_guidance);

// tanh(W3 applied to the dot-pooled map): Hadamard bilinear pooling, M x M x C.
template <typename T>
Var<T> pool_bilinear(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& f_guidance,
                     const Dense<T>& w_rgb, const Dense<T>& w_guidance,
                     const Dense<T>& w_bilinear);

// Shared tanh layer C -> K at every position, a 1x1 convolution K -> 1, then a
// softmax over all M x M positions. Returns the M x M x 1 attention map.
template <typename T>
Var<T> refine(Tape<T>& tape, const Var<T>& pooled, const Dense<T>& shared,
              const Conv2dLayer<T>& conv1x1);

// Parameters of the feature pooling and attention refinement modules.
template <typename T>
struct AttentionModule {
  Dense<T> w_rgb;
  Dense<T> w_guidance;
  std::optional<Dense<T>> w_bilinear;  // bilinear mode only
  std::optional<Dense<T>> shared;      // with refinement only
  std::optional<Conv2dLayer<T>> conv1x1;

  AttentionModule(const PoolingConfig& cfg, std::size_t rgb_width, std::size_t guidance_width,
                  bool with_refinement, const InitSpec& init);

  Var<T> pool(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& f_guidance) const;
  Var<T> attend(Tape<T>& tape, const Var<T>& pooled) const;

  void collect(std::vector<NamedParam<T>>& out);
  static std::size_t count(const PoolingConfig& cfg, std::size_t rgb_width,
                           std::size_t guidance_width, bool with_refinement);
};

}  // namespace dga
