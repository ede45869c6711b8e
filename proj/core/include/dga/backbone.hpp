#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dga/nn.hpp"

namespace dga {

struct BackboneConfig {
  std::size_t input_extent = 224;
  std::size_t rgb_channels = 3;
  // Input channels of the guidance stream. A single-channel raster is
  // replicated when this is 3.
  std::size_t guidance_channels = 1;
  std::vector<std::size_t> block_widths{64, 128, 256, 512, 512};
  std::vector<std::size_t> convs_per_block{2, 2, 3, 3, 3};

  void validate() const;
  // Spatial extent M of both feature maps.
  std::size_t feature_extent() const;
  // phi: channels of the RGB feature map.
  std::size_t rgb_width() const { return block_widths.back(); }
  // V: channels of the concatenated guidance feature map.
  std::size_t guidance_width() const;
};

// One VGG stream: a stack of conv blocks.
template <typename T>
class ConvStream {
 public:
  ConvStream(const BackboneConfig& cfg, std::size_t in_channels, const InitSpec& init,
             const std::string& name);

  // Output of every block, first to last.
  std::vector<Var<T>> forward_blocks(Tape<T>& tape, const Var<T>& image) const;

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out);
  std::size_t param_count() const;
  static std::size_t count(const BackboneConfig& cfg, std::size_t in_channels);

 private:
  std::vector<ConvBlock<T>> blocks_;
};

// Both streams' feature maps for one sample.
template <typename T>
struct FeaturePair {
  Var<T> f_rgb;       // M x M x phi
  Var<T> f_guidance;  // M x M x V
};

// Block outputs down-sampled to M x M by non-overlapping average pooling and
// concatenated along channels, first block first.
template <typename T>
Var<T> concat_block_features(const std::vector<Var<T>>& blocks, std::size_t feature_extent);

template <typename T>
class Backbone {
 public:
  // The guidance stream is only built when `with_guidance` is set.
  Backbone(BackboneConfig cfg, const InitSpec& init, bool with_guidance = true);

  const BackboneConfig& config() const noexcept { return cfg_; }
  bool has_guidance() const noexcept { return guidance_.has_value(); }

  // H x H x 3 -> M x M x phi (last block output).
  Var<T> extract_rgb(Tape<T>& tape, const Var<T>& image) const;
  std::vector<Var<T>> rgb_blocks(Tape<T>& tape, const Var<T>& image) const;
  // H x H x g -> M x M x V.
  Var<T> extract_guidance(Tape<T>& tape, const Var<T>& image) const;
  FeaturePair<T> extract(Tape<T>& tape, const Var<T>& rgb, const Var<T>& guidance) const;

  void collect(std::vector<NamedParam<T>>& out);
  std::size_t param_count() const;

 private:
  void check_extent(const Shape& s, const char* which, std::size_t channels) const;

  BackboneConfig cfg_;
  ConvStream<T> rgb_;
  std::optional<ConvStream<T>> guidance_;
};

}  // namespace dga
