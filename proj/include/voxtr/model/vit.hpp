#ifndef VOXTR_MODEL_VIT_HPP_
#define VOXTR_MODEL_VIT_HPP_

#include <vector>

#include "voxtr/core/ops.hpp"
#include "voxtr/model/blocks.hpp"
#include "voxtr/model/config.hpp"

namespace voxtr {

// Cuts a [3, S, S] image into the encoder's token grid. Row k is the
// channel-first row-major flattening of the patch at grid position
// (k div G, k mod G); the rows tile the image exactly.
// Throws std::invalid_argument when the image does not match cfg.
Tensor patchify(const Tensor& image, const EncoderConfig& cfg);

// Patch projection + learned positional embeddings + pre-norm transformer
// stack + final layer norm; yields the [T, D] token matrix for one view.
ag::Var encode_view(const Tensor& view, const EncoderConfig& cfg, const ParamStore& params);

// Elementwise mean over per-view token matrices. The list is canonicalized
// by sorting on content before the fixed-order summation, which makes the
// result bit-for-bit independent of view order. Empty input or shape
// disagreement throws std::invalid_argument.
ag::Var pool_views(const std::vector<ag::Var>& seqs);

}  // namespace voxtr

#endif  // VOXTR_MODEL_VIT_HPP_
