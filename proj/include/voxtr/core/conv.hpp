#ifndef VOXTR_CORE_CONV_HPP_
#define VOXTR_CORE_CONV_HPP_

#include "voxtr/core/tensor.hpp"

namespace voxtr {

// Gather/scatter kernels shared by the convolution ops. A convolution pairs
// a "big" grid with a "small" grid of window positions:
//   small = (big + 2p - k) / s + 1
// im2col gathers the big grid into a [C*k^n, small_cells] matrix; col2im is
// its adjoint (scatter-add back into the big grid). Forward convolution uses
// the pair one way round, transposed convolution the other.

long conv_out_side(long in, int k, int s, int p);    // (in + 2p - k) / s + 1
long convt_out_side(long in, int k, int s, int p);   // s * (in - 1) - 2p + k

// src: [C, D, H, W] -> cols: [C*k^3, oD*oH*oW]
void im2col_3d(const Tensor& src, int k, int s, int p, Tensor& cols);
// cols: [C*k^3, oD*oH*oW] scatter-added into dst: [C, D, H, W] (dst is zeroed first)
void col2im_3d(const Tensor& cols, const Shape& dst_shape, int k, int s, int p, Tensor& dst);

// src: [C, H, W] -> cols: [C*k^2, oH*oW]
void im2col_2d(const Tensor& src, int k, int s, int p, Tensor& cols);
void col2im_2d(const Tensor& cols, const Shape& dst_shape, int k, int s, int p, Tensor& dst);

}  // namespace voxtr

#endif  // VOXTR_CORE_CONV_HPP_
