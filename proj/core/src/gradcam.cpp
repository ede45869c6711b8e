#include "dga/gradcam.hpp"

#include <algorithm>

#include "dga/errors.hpp"
#include "dga/ops.hpp"

namespace dga {

Tensor<double> grad_cam_map(const Tensor<double>& activations, const Tensor<double>& gradients) {
  const Shape& s = activations.shape();
  if (s.size() != 3 || gradients.shape() != s) {
    throw ShapeError("grad-cam needs matching h x w x k maps, got " + to_string(s) + " and " +
                     to_string(gradients.shape()));
  }
  const std::size_t hw = s[0] * s[1], k = s[2];
  const auto a = activations.data();
  const auto g = gradients.data();
  std::vector<double> weights(k, 0.0);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < k; ++c) weights[c] += g[p * k + c];
  for (double& w : weights) w /= static_cast<double>(hw);

  Tensor<double> map({s[0], s[1]}, 0.0);
  auto m = map.data();
  for (std::size_t p = 0; p < hw; ++p) {
    double v = 0.0;
    for (std::size_t c = 0; c < k; ++c) v += weights[c] * a[p * k + c];
    m[p] = std::max(v, 0.0);
  }
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double low = *lo, high = *hi;
  if (high == low) {
    map.fill(high > 0.0 ? 1.0 : 0.0);
    return map;
  }
  for (double& v : m) v = (v - low) / (high - low);
  return map;
}

template <typename T>
Tensor<double> grad_cam(const Model<T>& model, const RGBDSample& sample, std::size_t class_index,
                        std::optional<std::size_t> block) {
  const ModelConfig& cfg = model.config();
  if (class_index >= cfg.num_classes) {
    throw ConfigError("grad-cam class " + std::to_string(class_index) + " outside " +
                      std::to_string(cfg.num_classes) + " classes");
  }
  const std::size_t blocks = cfg.backbone.block_widths.size();
  const std::size_t b = block.value_or(blocks - 1);
  if (b >= blocks) {
    throw ConfigError("grad-cam block " + std::to_string(b) + " outside " +
                      std::to_string(blocks) + " RGB blocks");
  }
  Tape<T> tape;
  const auto out =
      model.forward(tape, sample.rgb.cast<T>(), sample.guidance.cast<T>(), Mode::eval);
  const Var<T> target = out.rgb_blocks[b];
  const GradStore<T> grads = tape.backward(pick(out.logits, class_index));
  return grad_cam_map(target.value().template cast<double>(),
                      grads[target].template cast<double>());
}

Tensor<double> upsample_nearest(const Tensor<double>& map, std::size_t extent) {
  const Shape& s = map.shape();
  if (s.size() < 2) throw ShapeError("upsample needs an h x w map, got " + to_string(s));
  if (extent == 0) throw ConfigError("upsample extent must be positive");
  const std::size_t h = s[0], w = s[1];
  Tensor<double> up({extent, extent}, 0.0);
  auto u = up.data();
  const auto m = map.data();
  for (std::size_t y = 0; y < extent; ++y)
    for (std::size_t x = 0; x < extent; ++x)
      u[y * extent + x] = m[(y * h / extent) * w + (x * w / extent)];
  return up;
}

template Tensor<double> grad_cam(const Model<float>&, const RGBDSample&, std::size_t,
                                 std::optional<std::size_t>);
template Tensor<double> grad_cam(const Model<double>&, const RGBDSample&, std::size_t,
                                 std::optional<std::size_t>);

}  // namespace dga
