#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "pfci/nn/tensor.hpp"

namespace pfci::nn {

template <class T>
struct Node {
  Tensor<T> value;
  /// Empty until something accumulates into it.
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads `grad` of this node and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a node of the computation graph. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const noexcept { return node_->value; }
  Tensor<T>& mutable_value() const noexcept { return node_->value; }
  const Shape& shape() const noexcept { return node_->value.shape(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }

  /// Freezes or unfreezes a leaf; frozen leaves receive no gradient.
  void set_requires_grad(bool on) const noexcept { node_->requires_grad = on; }

  bool has_grad() const noexcept { return !node_->grad.empty(); }
  const Tensor<T>& grad() const noexcept { return node_->grad; }
  Tensor<T>& grad_buffer() const { return node_->grad_buffer(); }
  void zero_grad() const { node_->grad = Tensor<T>(); }

  /// Value of a one-element tensor.
  T item() const { return node_->value[0]; }

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Whether newly created ops record their backward closure. Thread-local.
bool grad_enabled() noexcept;
void set_grad_enabled(bool on) noexcept;

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Records every data-dependent branch taken by piecewise ops (ReLU sign, max-pool argmax,
/// L1 sign) while active on this thread. Two forward passes with equal traces evaluated the
/// same smooth piece of the loss surface.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  const std::vector<std::uint8_t>& decisions() const noexcept { return decisions_; }
  static void record(std::uint8_t d);
  static bool active() noexcept;

 private:
  std::vector<std::uint8_t> decisions_;
  BranchTrace* prev_;
};

/// Builds an op result. The closure is kept only when gradients are enabled and at least
/// one input requires them.
template <class T>
Var<T> make_result(Tensor<T> value, std::initializer_list<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
  Var<T> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& in : inputs) {
    if (in.defined()) node.inputs.push_back(in.node());
  }
  node.backward = std::move(backward);
  return out;
}

/// Copy of the value with no history.
template <class T>
Var<T> detach(const Var<T>& v) {
  return Var<T>(v.value());
}

/// Reverse-mode sweep from a one-element `loss`. Gradients accumulate into every reachable
/// node that requires them; the traversed graph is released afterwards.
template <class T>
void backward(const Var<T>& loss);

extern template void backward<float>(const Var<float>&);
extern template void backward<double>(const Var<double>&);

}  // namespace pfci::nn
