#include "pfci/nn/autograd.hpp"

#include <unordered_set>

namespace pfci::nn {

namespace {
thread_local bool g_grad_enabled = true;
thread_local BranchTrace* g_trace = nullptr;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }
void set_grad_enabled(bool on) noexcept { g_grad_enabled = on; }

BranchTrace::BranchTrace() : prev_(g_trace) { g_trace = this; }
BranchTrace::~BranchTrace() { g_trace = prev_; }
void BranchTrace::record(std::uint8_t d) {
  if (g_trace) g_trace->decisions_.push_back(d);
}
bool BranchTrace::active() noexcept { return g_trace != nullptr; }

template <class T>
void backward(const Var<T>& loss) {
  if (!loss.defined() || loss.value().numel() != 1) throw ShapeError("backward() needs a one-element loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before consumers).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  for (Node<T>* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->grad = Tensor<T>();
    }
  }
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);

}  // namespace pfci::nn
