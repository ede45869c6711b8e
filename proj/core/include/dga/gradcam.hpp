#pragma once

#include <cstddef>
#include <optional>

#include "dga/dataset.hpp"
#include "dga/model.hpp"

namespace dga {

// Class activation map from a feature map A (h x w x k) and the gradient of a
// class score with respect to it: w_k = spatial mean of the gradient,
// map = relu(sum_k w_k A_k), then min-max normalized to [0, 1]. A map whose
// relu is flat is returned as all zeros when it is zero and all ones
// otherwise.
Tensor<double> grad_cam_map(const Tensor<double>& activations, const Tensor<double>& gradients);

// Heatmap (M_b x M_b) for `class_index` on the output of RGB block `block`
// (default: the last block). Throws ConfigError for an invalid class or block.
template <typename T>
Tensor<double> grad_cam(const Model<T>& model, const RGBDSample& sample, std::size_t class_index,
                        std::optional<std::size_t> block = std::nullopt);

// Nearest-neighbour upsampling of an h x w map to extent x extent.
Tensor<double> upsample_nearest(const Tensor<double>& map, std::size_t extent);

}  // namespace dga
