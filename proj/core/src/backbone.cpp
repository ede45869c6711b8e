#include "dga/backbone.hpp"

#include <numeric>
#include <optional>

#include "dga/ops.hpp"

namespace dga {

void BackboneConfig::validate() const {
  if (block_widths.empty()) throw ConfigError("backbone needs at least one block");
  if (block_widths.size() != convs_per_block.size()) {
    throw ConfigError("block_widths has " + std::to_string(block_widths.size()) +
                      " entries but convs_per_block has " +
                      std::to_string(convs_per_block.size()));
  }
  for (std::size_t w : block_widths)
    if (w == 0) throw ConfigError("block widths must be positive");
  if (rgb_channels == 0 || guidance_channels == 0) {
    throw ConfigError("stream input channels must be positive");
  }
  const std::size_t div = std::size_t{1} << block_widths.size();
  if (input_extent == 0 || input_extent % div != 0) {
    throw ConfigError("input extent " + std::to_string(input_extent) + " is not divisible by " +
                      std::to_string(div));
  }
}

std::size_t BackboneConfig::feature_extent() const {
  return input_extent >> block_widths.size();
}

std::size_t BackboneConfig::guidance_width() const {
  return std::accumulate(block_widths.begin(), block_widths.end(), std::size_t{0});
}

template <typename T>
ConvStream<T>::ConvStream(const BackboneConfig& cfg, std::size_t in_channels,
                          const InitSpec& init, const std::string& name) {
  std::size_t in = in_channels;
  for (std::size_t b = 0; b < cfg.block_widths.size(); ++b) {
    blocks_.emplace_back(ConvBlockConfig{in, cfg.block_widths[b], cfg.convs_per_block[b]}, init,
                         name + ".block" + std::to_string(b));
    in = cfg.block_widths[b];
  }
}

template <typename T>
std::vector<Var<T>> ConvStream<T>::forward_blocks(Tape<T>& tape, const Var<T>& image) const {
  std::vector<Var<T>> outs;
  outs.reserve(blocks_.size());
  Var<T> h = image;
  for (const auto& block : blocks_) {
    h = block.forward(tape, h);
    outs.push_back(h);
  }
  return outs;
}

template <typename T>
void ConvStream<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    blocks_[b].collect(prefix + ".block" + std::to_string(b), out);
}

template <typename T>
std::size_t ConvStream<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.param_count();
  return n;
}

template <typename T>
std::size_t ConvStream<T>::count(const BackboneConfig& cfg, std::size_t in_channels) {
  std::size_t n = 0;
  std::size_t in = in_channels;
  for (std::size_t b = 0; b < cfg.block_widths.size(); ++b) {
    n += ConvBlock<T>::count({in, cfg.block_widths[b], cfg.convs_per_block[b]});
    in = cfg.block_widths[b];
  }
  return n;
}

template <typename T>
Var<T> concat_block_features(const std::vector<Var<T>>& blocks, std::size_t feature_extent) {
  std::vector<Var<T>> aligned;
  aligned.reserve(blocks.size());
  for (const auto& b : blocks) {
    const std::size_t extent = b.shape().at(0);
    if (extent % feature_extent != 0) {
      throw ShapeError("block extent " + std::to_string(extent) +
                       " is not a multiple of the feature extent " +
                       std::to_string(feature_extent));
    }
    aligned.push_back(avgpool2d(b, extent / feature_extent));
  }
  return concat_last(aligned);
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig cfg, const InitSpec& init, bool with_guidance)
    : cfg_((cfg.validate(), std::move(cfg))), rgb_(cfg_, cfg_.rgb_channels, init, "rgb") {
  if (with_guidance) guidance_.emplace(cfg_, cfg_.guidance_channels, init, "guidance");
}

template <typename T>
void Backbone<T>::check_extent(const Shape& s, const char* which, std::size_t channels) const {
  if (s.size() != 3 || s[0] != cfg_.input_extent || s[1] != cfg_.input_extent ||
      (s[2] != channels && !(s[2] == 1 && channels == 3 && std::string(which) == "guidance"))) {
    throw ShapeError(std::string(which) + " image " + to_string(s) + " does not match expected " +
                     to_string({cfg_.input_extent, cfg_.input_extent, channels}));
  }
}

template <typename T>
std::vector<Var<T>> Backbone<T>::rgb_blocks(Tape<T>& tape, const Var<T>& image) const {
  check_extent(image.shape(), "rgb", cfg_.rgb_channels);
  return rgb_.forward_blocks(tape, image);
}

template <typename T>
Var<T> Backbone<T>::extract_rgb(Tape<T>& tape, const Var<T>& image) const {
  return rgb_blocks(tape, image).back();
}

template <typename T>
Var<T> Backbone<T>::extract_guidance(Tape<T>& tape, const Var<T>& image) const {
  if (!guidance_) throw ConfigError("backbone was built without a guidance stream");
  check_extent(image.shape(), "guidance", cfg_.guidance_channels);
  Var<T> input = image;
  if (image.shape()[2] != cfg_.guidance_channels) input = concat_last<T>({image, image, image});
  return concat_block_features(guidance_->forward_blocks(tape, input), cfg_.feature_extent());
}

template <typename T>
FeaturePair<T> Backbone<T>::extract(Tape<T>& tape, const Var<T>& rgb,
                                    const Var<T>& guidance) const {
  return {extract_rgb(tape, rgb), extract_guidance(tape, guidance)};
}

template <typename T>
void Backbone<T>::collect(std::vector<NamedParam<T>>& out) {
  rgb_.collect("rgb", out);
  if (guidance_) guidance_->collect("guidance", out);
}

template <typename T>
std::size_t Backbone<T>::param_count() const {
  return rgb_.param_count() + (guidance_ ? guidance_->param_count() : 0);
}

template class ConvStream<float>;
template class ConvStream<double>;
template class Backbone<float>;
template class Backbone<double>;
template Var<float> concat_block_features(const std::vector<Var<float>>&, std::size_t);
template Var<double> concat_block_features(const std::vector<Var<double>>&, std::size_t);

}  // namespace dga
