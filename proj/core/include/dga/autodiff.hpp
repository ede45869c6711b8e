#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dga/tensor.hpp"

namespace dga {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; the handle and any
// reference returned by value() stay valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients produced by one backward pass, keyed by tape node.
template <typename T>
class GradStore {
 public:
  // Gradient of the loss with respect to `v`. Throws AutodiffError when `v`
  // does not participate in gradient computation.
  const Tensor<T>& operator[](const Var<T>& v) const;

  // Gradient for a parameter registered with Tape::parameter, or nullptr when
  // the parameter was never used on the tape.
  const Tensor<T>* find(const Tensor<T>& parameter) const;

 private:
  friend class Tape<T>;
  const void* tape_ = nullptr;
  mutable std::vector<std::optional<Tensor<T>>> grads_;
  std::vector<bool> requires_;
  std::unordered_map<const Tensor<T>*, std::size_t> params_;
};

// Append-only record of differentiable operations. Confined to one thread.
template <typename T>
class Tape {
 public:
  // What a node's backward function sees: its input node ids, its own forward
  // value, the incoming gradient, and one accumulator per input (null when
  // that input does not require a gradient).
  struct BackwardArgs {
    const Tape& tape;
    std::span<const std::size_t> inputs;
    const Tensor<T>& out;
    const Tensor<T>& grad_out;
    std::span<Tensor<T>* const> input_grads;

    const Tensor<T>& input(std::size_t i) const { return tape.value(inputs[i]); }
  };
  using BackwardFn = std::function<void(const BackwardArgs&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  // Owned leaf that receives a gradient.
  Var<T> variable(Tensor<T> value);
  // Leaf referencing an externally owned tensor (a model parameter). The same
  // address always maps to the same node, so repeated use accumulates.
  Var<T> parameter(const Tensor<T>& value, bool requires_grad = true);

  // Appends an interior node. `backward` may be empty for non-differentiable
  // outputs; it is dropped when no input requires a gradient.
  Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const;

  // Piecewise ops (relu, max pooling) fold their discrete choices into a
  // signature while tracking is on. Equal signatures mean the same linear
  // piece was taken everywhere.
  void track_branches(bool on) noexcept { track_branches_ = on; }
  bool tracking_branches() const noexcept { return track_branches_; }
  void note_branch(std::uint64_t choice) noexcept {
    branch_signature_ = (branch_signature_ ^ choice) * 0x100000001b3ULL;
  }
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a one-element loss. Visits each node once, in reverse
  // insertion order; gradients from multiple uses are summed.
  GradStore<T> backward(const Var<T>& loss) const;

 private:
  struct Node {
    std::optional<Tensor<T>> owned;
    const Tensor<T>* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> params_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0xcbf29ce484222325ULL;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (!tape_) throw AutodiffError("value() on an unbound Var");
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_ && tape_->requires_grad(id_);
}

}  // namespace dga
