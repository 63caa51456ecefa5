#include "voxtr/core/autodiff.hpp"

#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace voxtr::ag {

void Node::accumulate_grad(const Tensor& g) {
  Tensor& dst = grad_ref();
  if (!dst.same_shape(g)) throw std::logic_error(std::string("gradient shape mismatch in op ") + op);
  double* d = dst.data();
  const double* s = g.data();
  for (long i = 0; i < g.numel(); ++i) d[i] += s[i];
}

Tensor& Node::grad_ref() {
  if (grad.numel() != value.numel()) grad = Tensor::zeros(value.shape());
  return grad;
}

void Node::zero_grad() {
  if (grad.numel() > 0) grad.fill(0.0);
}

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

bool any_requires_grad(const std::vector<Var>& vars) {
  for (const auto& v : vars) {
    if (v && v->requires_grad) return true;
  }
  return false;
}

void backward(const Var& root) {
  if (!root) throw std::logic_error("backward on null var");
  if (root->value.numel() != 1) throw std::logic_error("backward root must be scalar");

  // Iterative post-order topological sort.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->inputs.size()) {
      Node* child = node->inputs[next_child].get();
      ++next_child;
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_ref();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.numel() > 0) n->backward_fn(*n);
  }
}

}  // namespace voxtr::ag
