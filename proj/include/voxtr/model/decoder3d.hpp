#ifndef VOXTR_MODEL_DECODER3D_HPP_
#define VOXTR_MODEL_DECODER3D_HPP_

#include <string>

#include "voxtr/core/ops.hpp"
#include "voxtr/model/config.hpp"
#include "voxtr/model/params.hpp"

namespace voxtr {

// Runs the query_side^3 learned query embeddings through `layers` blocks of
// unmasked self-attention, cross-attention to `memory`, and feed-forward —
// every query decoded in parallel. Returns the [M^3, D] query matrix; row
// r = (x*M + y)*M + z is the query for cube cell (x, y, z).
// Memory whose width differs from cfg.dim throws ConfigError.
ag::Var decode_queries(const ag::Var& memory, const DecoderConfig& cfg, const ParamStore& params);

// [M^3, D] query rows -> [D, M, M, M] feature cube (lossless transpose).
ag::Var reshape_to_cube(const ag::Var& grid, int query_side);

// conv(k=3,p=1) -> relu -> conv(k=3,p=1) plus a conv(k=1) skip, then relu.
// Shape-preserving; parameters under prefix + {conv1,conv2,skip}.
ag::Var residual_block(const ag::Var& x, const ParamStore& params, const std::string& prefix,
                       int kernel = 3);

// 1x1x1 channel bridge, then upsample_stages doubling transposed convs
// interleaved with residual blocks, then a 1x1x1 single-channel head and a
// sigmoid. A [D, M, M, M] cube becomes an [R, R, R] probability field with
// R = M * stride^upsample_stages.
ag::Var cnn_decode(const ag::Var& cube, const CnnDecoderConfig& cfg, const ParamStore& params,
                   const std::string& prefix = "cnn.");

// Single-affine-map head: each query row maps through D -> (R/M)^3 plus a
// sigmoid, filling the (R/M)^3 sub-block at its cube cell. Returns the
// [R, R, R] probability field. Resolution not divisible by the query side
// throws ConfigError.
ag::Var mlp_decode(const ag::Var& grid, const ParamStore& params, int resolution, int query_side);

}  // namespace voxtr

#endif  // VOXTR_MODEL_DECODER3D_HPP_
