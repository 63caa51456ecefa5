#ifndef VOXTR_MODEL_RESNET_HPP_
#define VOXTR_MODEL_RESNET_HPP_

#include "voxtr/core/ops.hpp"
#include "voxtr/model/config.hpp"
#include "voxtr/model/params.hpp"

namespace voxtr {

// ResNet-50 ablation backbone: the standard bottleneck stack with frozen
// batch-norm statistics (affine scale/shift stay trainable), ending in a
// stride-32 feature map whose 2048-channel cells are linearly projected to
// cfg.dim. Cell (y, x) of the G'xG' map becomes token y*G' + x, so the
// output is a FeatureSeq-compatible [G'^2, dim] matrix.
ag::Var encode_backbone_resnet(const Tensor& view, const EncoderConfig& cfg,
                               const ParamStore& params);

}  // namespace voxtr

#endif  // VOXTR_MODEL_RESNET_HPP_
