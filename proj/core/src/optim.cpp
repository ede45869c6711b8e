#include "dga/optim.hpp"

#include <cmath>
#include <string>

namespace dga {

template <typename T>
void Adam<T>::step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                   double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (!(lr >= 0.0)) throw ConfigError("adam: learning rate must be non-negative");
  if (m_.empty()) {
    for (const Tensor<T>* p : params) {
      m_.emplace_back(p->shape(), T{0});
      v_.emplace_back(p->shape(), T{0});
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != m_[i].shape()) {
      throw ShapeError("adam: parameter " + to_string(params[i]->shape()) + " vs gradient " +
                       to_string(grads[i]->shape()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg_.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data().data();
    const T* g = grads[i]->data().data();
    T* m = m_[i].data().data();
    T* v = v_[i].data().data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      p[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
}

double lr_schedule(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

template class Adam<float>;
template class Adam<double>;

}  // namespace dga
