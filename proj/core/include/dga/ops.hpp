#pragma once

#include <cstddef>
#include <vector>

#include "dga/autodiff.hpp"
#include "dga/tensor.hpp"

namespace dga {

enum class ElementwiseOp { add, sub, mul };

// a (op) b. `b` may broadcast against the trailing axes of `a`: its rank is at
// most a's and each of its extents equals the matching extent of `a` or is 1.
// The result has a's shape.
template <typename T>
Var<T> elementwise(ElementwiseOp op, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return elementwise(ElementwiseOp::add, a, b);
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return elementwise(ElementwiseOp::sub, a, b);
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return elementwise(ElementwiseOp::mul, a, b);
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

// [m x k] . [k x n] -> [m x n]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

// Same-padded cross-correlation of an H x W x Cin map with kh x kw x Cin x Cout
// kernels plus a per-output-channel bias. kh and kw must be odd.
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernels, const Var<T>& bias);

// Non-overlapping k x k max pooling of an H x W x C map. Ties route the
// gradient to the first maximum in row-major window order.
template <typename T>
Var<T> maxpool2d(const Var<T>& input, std::size_t k = 2);

// Non-overlapping window x window average pooling of an H x W x C map.
template <typename T>
Var<T> avgpool2d(const Var<T>& input, std::size_t window);

enum class ActivationKind { relu, tanh, softmax };

// Elementwise relu/tanh, or softmax along `axis` (negative counts from the end).
template <typename T>
Var<T> activation(ActivationKind kind, const Var<T>& x, int axis = -1);

template <typename T>
Var<T> relu(const Var<T>& x) {
  return activation(ActivationKind::relu, x);
}
template <typename T>
Var<T> tanh(const Var<T>& x) {
  return activation(ActivationKind::tanh, x);
}
template <typename T>
Var<T> softmax(const Var<T>& x, int axis = -1) {
  return activation(ActivationKind::softmax, x, axis);
}

// Sum of all elements -> rank-0 scalar.
template <typename T>
Var<T> sum(const Var<T>& x);

// H x W x C -> C, summing over both spatial axes.
template <typename T>
Var<T> spatial_sum(const Var<T>& x);

// H x W x C -> C, averaging over both spatial axes.
template <typename T>
Var<T> spatial_mean(const Var<T>& x);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// Concatenation along the last axis; all leading extents must agree.
template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& parts);

// Element at a flat index -> rank-0 scalar.
template <typename T>
Var<T> pick(const Var<T>& x, std::size_t index);

// -log softmax(logits)[label] for a logit vector, computed via log-sum-exp.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::size_t label);

// Untaped softmax of a vector, with max subtraction.
template <typename T>
Tensor<T> softmax_values(const Tensor<T>& logits);

}  // namespace dga
