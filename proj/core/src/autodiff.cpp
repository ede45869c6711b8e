#include "dga/autodiff.hpp"

#include <string>

namespace dga {

template <typename T>
const Tensor<T>& GradStore<T>::operator[](const Var<T>& v) const {
  if (!v.valid() || &v.tape() != tape_) {
    throw AutodiffError("gradient requested for a Var from a different tape");
  }
  if (v.id() >= grads_.size() || !requires_[v.id()]) {
    throw AutodiffError("gradient requested for detached node " + std::to_string(v.id()));
  }
  auto& g = grads_[v.id()];
  // Participates in gradient flow but the loss does not depend on it.
  if (!g) g = Tensor<T>(v.value().shape(), T{0});
  return *g;
}

template <typename T>
const Tensor<T>* GradStore<T>::find(const Tensor<T>& parameter) const {
  auto it = params_.find(&parameter);
  if (it == params_.end()) return nullptr;
  const auto& g = grads_[it->second];
  return g ? &*g : nullptr;
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::parameter(const Tensor<T>& value, bool requires_grad) {
  if (auto it = params_.find(&value); it != params_.end()) return Var<T>(this, it->second);
  Node n;
  n.external = &value;
  n.requires_grad = requires_grad;
  Var<T> v = push(std::move(n));
  params_.emplace(&value, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (!in.valid() || &in.tape() != this) {
      throw AutodiffError("operation input recorded on a different tape");
    }
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad && backward) {
    n.backward = std::move(backward);
  } else {
    n.requires_grad = false;
  }
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : *n.owned;
}

template <typename T>
GradStore<T> Tape<T>::backward(const Var<T>& loss) const {
  if (!loss.valid() || &loss.tape() != this) {
    throw AutodiffError("loss was not recorded on this tape");
  }
  const Tensor<T>& lv = value(loss.id());
  if (lv.size() != 1) {
    throw AutodiffError("backward requires a scalar loss, got shape " + to_string(lv.shape()));
  }

  GradStore<T> store;
  store.tape_ = this;
  store.grads_.resize(nodes_.size());
  store.requires_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) store.requires_[i] = nodes_[i].requires_grad;
  store.params_ = params_;

  if (!nodes_[loss.id()].requires_grad) return store;
  store.grads_[loss.id()] = Tensor<T>(lv.shape(), T{1});

  std::vector<Tensor<T>*> input_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.backward || !store.grads_[i]) continue;
    input_grads.assign(n.inputs.size(), nullptr);
    for (std::size_t j = 0; j < n.inputs.size(); ++j) {
      std::size_t in = n.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      auto& slot = store.grads_[in];
      if (!slot) slot = Tensor<T>(value(in).shape(), T{0});
      input_grads[j] = &*slot;
    }
    n.backward(BackwardArgs{*this, n.inputs, value(i), *store.grads_[i], input_grads});
  }
  return store;
}

template class GradStore<float>;
template class GradStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace dga
