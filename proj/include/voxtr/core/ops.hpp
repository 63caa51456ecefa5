#ifndef VOXTR_CORE_OPS_HPP_
#define VOXTR_CORE_OPS_HPP_

#include <vector>

#include "voxtr/core/autodiff.hpp"

namespace voxtr::ag {

// While a guard is alive all ops build value-only nodes: no backward
// closures, no stashed intermediates. Used by evaluation and prediction.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool active();
};

// -- elementwise / shape --
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& x);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var reshape(const Var& x, Shape shape);
Var detach(const Var& x);

// -- linear algebra --
Var matmul(const Var& a, const Var& b);                      // [M,K]x[K,N]
Var linear(const Var& x, const Var& w, const Var& b);        // x[T,I], w[O,I], b[O] -> [T,O]
Var add_rowvec(const Var& m, const Var& v);                  // m[T,D] + v[D] per row
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Multi-head scaled dot-product attention over already-projected q/k/v.
// q:[Tq,D] k,v:[Tk,D]; D divisible by heads. causal masks j > i (Tq == Tk).
Var attention(const Var& q, const Var& k, const Var& v, int heads, bool causal);

// -- reductions / gathers --
Var sum_sq(const Var& x);                                    // scalar
Var mean_all(const Var& x);                                  // scalar
Var mean_stack(const std::vector<Var>& xs);                  // elementwise mean, summed in vector order
Var embedding(const Var& table, const std::vector<long>& ids);  // table[K,D] -> [n,D]
Var gather_flat(const Var& x, std::vector<long> idx);        // out[i] = flat(x)[idx[i]]
Var softmax_xent_mean(const Var& logits, const std::vector<long>& targets);  // [T,K] -> scalar

// [M^3, D] query rows -> [D, M, M, M] cube; row r = (x*M + y)*M + z.
Var rows_to_cube(const Var& x, long m);

// -- convolution --
// x:[Ci,D,H,W] w:[Co,Ci,k,k,k] b:[Co] (pass nullptr for no bias)
Var conv3d(const Var& x, const Var& w, const Var& b, int k, int s, int p);
// x:[Ci,D,H,W] w:[Ci,Co,k,k,k] b:[Co]
Var conv_transpose3d(const Var& x, const Var& w, const Var& b, int k, int s, int p);
// x:[Ci,H,W] w:[Co,Ci,k,k] b:[Co]
Var conv2d(const Var& x, const Var& w, const Var& b, int k, int s, int p);
Var maxpool2d(const Var& x, int k, int s, int p);
// Affine batch norm with fixed statistics; gamma/beta trainable.
Var frozen_bn2d(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                const Tensor& var, double eps = 1e-5);

}  // namespace voxtr::ag

#endif  // VOXTR_CORE_OPS_HPP_
