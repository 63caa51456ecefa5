#ifndef VOXTR_MODEL_PRETRAINED_HPP_
#define VOXTR_MODEL_PRETRAINED_HPP_

#include <string>

#include "voxtr/core/tensor.hpp"
#include "voxtr/model/config.hpp"
#include "voxtr/model/params.hpp"

namespace voxtr {

// Default name-map data file for a backbone family, relative to the
// repository root ("data/deit_name_map.json" / "data/resnet50_name_map.json").
std::string default_name_map_path(EncoderVariant variant);

// Copies encoder weights from a tensor archive into `params`, translating
// archive names through the JSON name map. Handles the standard packaging
// quirks of patch-transformer checkpoints: fused qkv tensors are split into
// the separate q/k/v projections, leading class/distillation rows of the
// positional table are dropped, a positional grid of a different side is
// resized bilinearly (corner values preserved), and a 4-D patch-projection
// kernel is flattened. Anything missing or shape-incompatible throws
// ImportError naming the archive tensor.
void load_pretrained_encoder(ParamStore& params, const std::string& archive_path,
                             const EncoderConfig& cfg, const std::string& name_map_path = "");

// Align-corners bilinear resize of a positional table laid out as
// [src_grid^2, D] row-major over (y, x); exposed for testing.
Tensor interpolate_pos_grid(const Tensor& src, long src_grid, long dst_grid);

}  // namespace voxtr

#endif  // VOXTR_MODEL_PRETRAINED_HPP_
