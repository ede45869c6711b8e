#include "dga/nn.hpp"

#include <cmath>

#include "dga/ops.hpp"
#include "dga/random.hpp"

namespace dga {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(InitScheme scheme) {
  return scheme == InitScheme::uniform_fan_in ? "uniform_fan_in" : "normal";
}

InitScheme parse_init_scheme(std::string_view text) {
  if (text == "uniform_fan_in") return InitScheme::uniform_fan_in;
  if (text == "normal") return InitScheme::normal;
  throw ConfigError("unknown init scheme '" + std::string(text) + "'");
}

template <typename T>
void initialize(Tensor<T>& weights, std::size_t fan_in, double gain, const InitSpec& init,
                std::string_view name) {
  Rng rng(derive_seed(init.seed, fnv1a(name)));
  if (init.scheme == InitScheme::normal) {
    for (T& w : weights.data()) w = static_cast<T>(init.sigma * rng.normal());
    return;
  }
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  for (T& w : weights.data()) w = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(std::size_t kernel, std::size_t in_channels,
                            std::size_t out_channels, double gain, const InitSpec& init,
                            const std::string& name)
    : kernels(Shape{kernel, kernel, in_channels, out_channels}), bias(Shape{out_channels}) {
  initialize(kernels, kernel * kernel * in_channels, gain, init, name + ".kernels");
}

template <typename T>
Var<T> Conv2dLayer<T>::forward(Tape<T>& tape, const Var<T>& x) const {
  return conv2d(x, tape.parameter(kernels), tape.parameter(bias));
}

template <typename T>
void Conv2dLayer<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  out.push_back({prefix + ".kernels", &kernels});
  out.push_back({prefix + ".bias", &bias});
}

template <typename T>
ConvBlock<T>::ConvBlock(const ConvBlockConfig& cfg, const InitSpec& init,
                        const std::string& name)
    : cfg_(cfg) {
  if (cfg.out_channels == 0 || cfg.in_channels == 0) {
    throw ConfigError("conv block '" + name + "' needs at least one input and output channel");
  }
  if (cfg.convs < 1 || cfg.convs > 3) {
    throw ConfigError("conv block '" + name + "' needs 1 to 3 convolutions, got " +
                      std::to_string(cfg.convs));
  }
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.convs; ++i) {
    layers_.emplace_back(3, in, cfg.out_channels, std::sqrt(2.0), init,
                         name + ".conv" + std::to_string(i));
    in = cfg.out_channels;
  }
}

template <typename T>
Var<T> ConvBlock<T>::forward(Tape<T>& tape, const Var<T>& x) const {
  Var<T> h = x;
  for (const auto& layer : layers_) h = relu(layer.forward(tape, h));
  return maxpool2d(h, 2);
}

template <typename T>
void ConvBlock<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i].collect(prefix + ".conv" + std::to_string(i), out);
}

template <typename T>
std::size_t ConvBlock<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.kernels.size() + l.bias.size();
  return n;
}

template <typename T>
std::size_t ConvBlock<T>::count(const ConvBlockConfig& cfg) {
  std::size_t n = 0;
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.convs; ++i) {
    n += Conv2dLayer<T>::count(3, in, cfg.out_channels);
    in = cfg.out_channels;
  }
  return n;
}

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, DenseActivation act, const InitSpec& init,
                const std::string& name)
    : weight(Shape{in, out}), bias(Shape{out}), activation(act) {
  initialize(weight, in, 1.0, init, name + ".weight");
}

template <typename T>
Var<T> Dense<T>::forward(Tape<T>& tape, const Var<T>& x) const {
  const Shape& s = x.shape();
  if (s.empty() || s.back() != in_width()) {
    throw ShapeError("dense layer expects trailing width " + std::to_string(in_width()) +
                     ", got " + to_string(s));
  }
  const std::size_t rows = x.value().size() / in_width();
  Var<T> flat = reshape(x, Shape{rows, in_width()});
  Var<T> y = add(matmul(flat, tape.parameter(weight)), tape.parameter(bias));
  Shape out_shape = s;
  out_shape.back() = out_width();
  y = reshape(y, out_shape);
  switch (activation) {
    case DenseActivation::none:
      return y;
    case DenseActivation::tanh:
      return tanh(y);
    case DenseActivation::softmax:
      return softmax(y, -1);
  }
  return y;
}

template <typename T>
void Dense<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

template void initialize(Tensor<float>&, std::size_t, double, const InitSpec&, std::string_view);
template void initialize(Tensor<double>&, std::size_t, double, const InitSpec&, std::string_view);
template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template class ConvBlock<float>;
template class ConvBlock<double>;
template struct Dense<float>;
template struct Dense<double>;

}  // namespace dga
