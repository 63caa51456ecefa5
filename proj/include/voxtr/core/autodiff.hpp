#ifndef VOXTR_CORE_AUTODIFF_HPP_
#define VOXTR_CORE_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxtr/core/tensor.hpp"

namespace voxtr::ag {

class Node;
using Var = std::shared_ptr<Node>;

// One vertex of a dynamically built reverse-mode graph. Ops that need
// forward intermediates for their backward pass stash them in `saved`.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;
  std::vector<Tensor> saved;
  std::vector<std::vector<long>> saved_ids;

  void accumulate_grad(const Tensor& g);
  Tensor& grad_ref();  // zero-allocates to value's shape on first use
  void zero_grad();
};

// Trainable leaf.
Var leaf(Tensor value, bool requires_grad);

// Non-trainable input.
Var constant(Tensor value);

bool any_requires_grad(const std::vector<Var>& vars);

// Reverse sweep from a scalar root; seeds d(root)/d(root) = 1 and
// accumulates into every reachable node with requires_grad.
void backward(const Var& root);

}  // namespace voxtr::ag

#endif  // VOXTR_CORE_AUTODIFF_HPP_
