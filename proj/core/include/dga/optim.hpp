#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dga/tensor.hpp"

namespace dga {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created on the first step and must
// keep mirroring the parameter list afterwards.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
            double lr);

  std::size_t steps() const noexcept { return t_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  double lr0 = 1e-5;
  double decay = 0.9;  // multiplicative, once per epoch
  std::size_t batch_size = 30;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
};

// lr0 * decay^epoch
double lr_schedule(const TrainConfig& cfg, std::size_t epoch);

}  // namespace dga
