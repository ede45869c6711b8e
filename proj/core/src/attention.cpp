#include "dga/attention.hpp"

#include "dga/ops.hpp"

namespace dga {
namespace {

void require_same_spatial(const Shape& a, const Shape& b) {
  if (a.size() != 3 || b.size() != 3 || a[0] != b[0] || a[1] != b[1]) {
    throw ShapeError("feature maps must share spatial extent: " + to_string(a) + " vs " +
                     to_string(b));
  }
}

}  // namespace

std::string_view to_string(PoolingMode mode) {
  return mode == PoolingMode::dot ? "dot" : "bilinear";
}

PoolingMode parse_pooling_mode(std::string_view text) {
  if (text == "dot") return PoolingMode::dot;
  if (text == "bilinear") return PoolingMode::bilinear;
  throw ConfigError("unknown pooling mode '" + std::string(text) + "'");
}

void PoolingConfig::validate() const {
  if (c == 0 || k == 0) throw ConfigError("pooling widths C and K must be positive");
}

template <typename T>
Var<T> pool_dot(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& f_guidance,
                const Dense<T>& w_rgb, const Dense<T>& w_guidance) {
  require_same_spatial(f_rgb.shape(), f_guidance.shape());
  return mul(w_rgb.forward(tape, f_rgb), w_guidance.forward(tape, f_guidance));
}

template <typename T>
Var<T> pool_bilinear(Tape<T>& tape, const Var<T>& f_rgb, const Var<T>& f_guidance,
                     const Dense<T>& w_rgb, const Dense<T>& w_guidance,
                     const Dense<T>& w_bilinear) {
  return w_bilinear.forward(tape, pool_dot(tape, f_rgb, f_guidance, w_rgb, w_guidance));
}

template <typename T>
Var<T> refine(Tape<T>& tape, const Var<T>& pooled, const Dense<T>& shared,
              const Conv2dLayer<T>& conv1x1) {
  const Shape& s = pooled.shape();
  if (s.size() != 3 || s[2] != shared.in_width()) {
    throw ShapeError("refinement expects M x M x " + std::to_string(shared.in_width()) +
                     ", got " + to_string(s));
  }
  Var<T> scores = conv1x1.forward(tape, shared.forward(tape, pooled));
  Var<T> flat = reshape(scores, Shape{s[0] * s[1]});
  return reshape(softmax(flat, 0), Shape{s[0], s[1], 1});
}

template <typename T>
AttentionModule<T>::AttentionModule(const PoolingConfig& cfg, std::size_t rgb_width,
                                    std::size_t guidance_width, bool with_refinement,
                                    const InitSpec& init)
    : w_rgb(rgb_width, cfg.c, DenseActivation::tanh, init, "pool.w_rgb"),
      w_guidance(guidance_width, cfg.c, DenseActivation::tanh, init, "pool.w_guidance") {
  cfg.validate();
  if (cfg.mode == PoolingMode::bilinear)
    w_bilinear.emplace(cfg.c, cfg.c, DenseActivation::tanh, init, "pool.w_bilinear");
  if (with_refinement) {
    shared.emplace(cfg.c, cfg.k, DenseActivation::tanh, init, "refine.shared");
    conv1x1.emplace(1, cfg.k, 1, 1.0, init, "refine.conv1x1");
  }
}

template <typename T>
Var<T> AttentionModule<T>::pool(Tape<T>& tape, const Var<T>& f_rgb,
                                const Var<T>& f_guidance) const {
  if (w_bilinear) return pool_bilinear(tape, f_rgb, f_guidance, w_rgb, w_guidance, *w_bilinear);
  return pool_dot(tape, f_rgb, f_guidance, w_rgb, w_guidance);
}

template <typename T>
Var<T> AttentionModule<T>::attend(Tape<T>& tape, const Var<T>& pooled) const {
  if (!shared) throw ConfigError("attention module was built without refinement");
  return refine(tape, pooled, *shared, *conv1x1);
}

template <typename T>
void AttentionModule<T>::collect(std::vector<NamedParam<T>>& out) {
  w_rgb.collect("pool.w_rgb", out);
  w_guidance.collect("pool.w_guidance", out);
  if (w_bilinear) w_bilinear->collect("pool.w_bilinear", out);
  if (shared) {
    shared->collect("refine.shared", out);
    conv1x1->collect("refine.conv1x1", out);
  }
}

template <typename T>
std::size_t AttentionModule<T>::count(const PoolingConfig& cfg, std::size_t rgb_width,
                                      std::size_t guidance_width, bool with_refinement) {
  std::size_t n = Dense<T>::count(rgb_width, cfg.c) + Dense<T>::count(guidance_width, cfg.c);
  if (cfg.mode == PoolingMode::bilinear) n += Dense<T>::count(cfg.c, cfg.c);
  if (with_refinement) n += Dense<T>::count(cfg.c, cfg.k) + Conv2dLayer<T>::count(1, cfg.k, 1);
  return n;
}

#define DGA_INSTANTIATE_ATTENTION(T)                                                        \
  template Var<T> pool_dot(Tape<T>&, const Var<T>&, const Var<T>&, const Dense<T>&,         \
                           const Dense<T>&);                                                \
  template Var<T> pool_bilinear(Tape<T>&, const Var<T>&, const Var<T>&, const Dense<T>&,    \
                                const Dense<T>&, const Dense<T>&);                          \
  template Var<T> refine(Tape<T>&, const Var<T>&, const Dense<T>&, const Conv2dLayer<T>&);  \
  template struct AttentionModule<T>;

DGA_INSTANTIATE_ATTENTION(float)
DGA_INSTANTIATE_ATTENTION(double)

#undef DGA_INSTANTIATE_ATTENTION

}  // namespace dga
