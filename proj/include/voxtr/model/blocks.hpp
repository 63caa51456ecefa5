#ifndef VOXTR_MODEL_BLOCKS_HPP_
#define VOXTR_MODEL_BLOCKS_HPP_

#include <string>

#include "voxtr/core/ops.hpp"
#include "voxtr/model/params.hpp"

namespace voxtr {

// Graph fragments shared by the image encoder, the query decoder, and the
// code-sequence decoder. All blocks are pre-norm residual: the sublayer
// reads a normalized copy and its output is added back onto the stream.

// q/k/v/o projected multi-head attention; parameters live under
// prefix + {wq,wk,wv,wo}.{weight,bias}.
ag::Var mha(const ParamStore& params, const std::string& prefix, const ag::Var& query_in,
            const ag::Var& kv_in, int heads, bool causal);

// x + mha(norm1(x)) followed by x + ffn(norm2(x)); GELU inside the FFN.
ag::Var encoder_block(const ParamStore& params, const std::string& prefix, const ag::Var& x,
                      int heads);

// Self-attention, cross-attention to `memory`, FFN. The self-attention is
// causal for autoregressive decoding and unmasked for parallel decoding.
ag::Var decoder_block(const ParamStore& params, const std::string& prefix, const ag::Var& x,
                      const ag::Var& memory, int heads, bool causal_self);

ag::Var layer_norm_named(const ParamStore& params, const std::string& prefix, const ag::Var& x);

}  // namespace voxtr

#endif  // VOXTR_MODEL_BLOCKS_HPP_
