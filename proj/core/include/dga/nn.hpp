#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dga/autodiff.hpp"
#include "dga/tensor.hpp"

namespace dga {

enum class InitScheme { uniform_fan_in, normal };

std::string_view to_string(InitScheme scheme);
InitScheme parse_init_scheme(std::string_view text);

// Random initialization recipe. Every parameter draws from its own stream
// derived from `seed` and the parameter's name, so identical specs always
// produce bit-identical parameters regardless of construction order.
struct InitSpec {
  InitScheme scheme = InitScheme::uniform_fan_in;
  double sigma = 0.01;  // normal scheme only
  std::uint64_t seed = 0;
};

// Fills `weights` from the spec. uniform_fan_in draws U(-b, b) with
// b = gain * sqrt(3 / fan_in).
template <typename T>
void initialize(Tensor<T>& weights, std::size_t fan_in, double gain, const InitSpec& init,
                std::string_view name);

// A named view of one trainable tensor.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct ConstNamedParam {
  std::string name;
  const Tensor<T>* tensor;
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> kernels;  // kh x kw x Cin x Cout
  Tensor<T> bias;     // Cout

  Conv2dLayer(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
              double gain, const InitSpec& init, const std::string& name);

  Var<T> forward(Tape<T>& tape, const Var<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out);

  static std::size_t count(std::size_t kernel, std::size_t in_channels,
                           std::size_t out_channels) {
    return kernel * kernel * in_channels * out_channels + out_channels;
  }
};

struct ConvBlockConfig {
  std::size_t in_channels = 3;
  std::size_t out_channels = 64;
  std::size_t convs = 2;  // 1 to 3 3x3 convolutions, each followed by relu
};

// VGG block: `convs` same-padded 3x3 conv+relu layers, then a 2x2 max pool.
template <typename T>
class ConvBlock {
 public:
  ConvBlock(const ConvBlockConfig& cfg, const InitSpec& init, const std::string& name);

  // H x W x Cin -> H/2 x W/2 x out_channels
  Var<T> forward(Tape<T>& tape, const Var<T>& x) const;

  const ConvBlockConfig& config() const noexcept { return cfg_; }
  const std::vector<Conv2dLayer<T>>& layers() const noexcept { return layers_; }
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out);
  std::size_t param_count() const;

  static std::size_t count(const ConvBlockConfig& cfg);

 private:
  ConvBlockConfig cfg_;
  std::vector<Conv2dLayer<T>> layers_;
};

enum class DenseActivation { none, tanh, softmax };

// y = act(x W + b) along the last axis; leading axes are preserved, so a
// M x M x in map is projected independently at every position.
template <typename T>
struct Dense {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // out
  DenseActivation activation = DenseActivation::none;

  Dense(std::size_t in, std::size_t out, DenseActivation act, const InitSpec& init,
        const std::string& name);

  std::size_t in_width() const { return weight.extent(0); }
  std::size_t out_width() const { return weight.extent(1); }

  Var<T> forward(Tape<T>& tape, const Var<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out);
  std::size_t param_count() const { return weight.size() + bias.size(); }

  static std::size_t count(std::size_t in, std::size_t out) { return in * out + out; }
};

template <typename T>
std::size_t count_params(const std::vector<NamedParam<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

}  // namespace dga
