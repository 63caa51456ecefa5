#include "voxtr/model/resnet.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace voxtr {

namespace {

ag::Var bn(const ParamStore& params, const std::string& prefix, const ag::Var& x) {
  return ag::frozen_bn2d(x, params.at(prefix + ".gamma"), params.at(prefix + ".beta"),
                         params.at(prefix + ".running_mean")->value,
                         params.at(prefix + ".running_var")->value);
}

// Bottleneck: 1x1 reduce, 3x3 (carries the stride), 1x1 expand; the first
// block of each stage reshapes the shortcut with a strided 1x1 projection.
ag::Var bottleneck(const ParamStore& params, const std::string& prefix, const ag::Var& x,
                   int stride, bool projected_shortcut) {
  ag::Var out = ag::conv2d(x, params.at(prefix + "conv1.weight"), {}, 1, 1, 0);
  out = ag::relu(bn(params, prefix + "bn1", out));
  out = ag::conv2d(out, params.at(prefix + "conv2.weight"), {}, 3, stride, 1);
  out = ag::relu(bn(params, prefix + "bn2", out));
  out = ag::conv2d(out, params.at(prefix + "conv3.weight"), {}, 1, 1, 0);
  out = bn(params, prefix + "bn3", out);
  ag::Var shortcut = x;
  if (projected_shortcut) {
    shortcut = ag::conv2d(x, params.at(prefix + "downsample.conv.weight"), {}, 1, stride, 0);
    shortcut = bn(params, prefix + "downsample.bn", shortcut);
  }
  return ag::relu(ag::add(out, shortcut));
}

}  // namespace

ag::Var encode_backbone_resnet(const Tensor& view, const EncoderConfig& cfg,
                               const ParamStore& params) {
  const long s = cfg.image_size();
  if (view.rank() != 3 || view.dim(0) != 3 || view.dim(1) != s || view.dim(2) != s) {
    throw std::invalid_argument("resnet: image shape " + shape_str(view.shape()) +
                                " does not match config side " + std::to_string(s));
  }
  ag::Var x = ag::conv2d(ag::constant(view), params.at("encoder.backbone.conv1.weight"), {}, 7,
                         2, 3);
  x = ag::relu(bn(params, "encoder.backbone.bn1", x));
  x = ag::maxpool2d(x, 3, 2, 1);

  const int counts[4] = {3, 4, 6, 3};
  for (int stage = 0; stage < 4; ++stage) {
    for (int block = 0; block < counts[stage]; ++block) {
      const std::string prefix = "encoder.backbone.layer" + std::to_string(stage + 1) + "." +
                                 std::to_string(block) + ".";
      const int stride = (block == 0 && stage > 0) ? 2 : 1;
      x = bottleneck(params, prefix, x, stride, /*projected_shortcut=*/block == 0);
    }
  }

  // [C, G', G'] cells -> [G'^2, C] tokens, row-major over (y, x).
  const long ch = x->value.dim(0);
  const long grid = x->value.dim(1);
  const long tokens = grid * grid;
  std::vector<long> idx(static_cast<size_t>(tokens * ch));
  for (long t = 0; t < tokens; ++t) {
    for (long c = 0; c < ch; ++c) idx[static_cast<size_t>(t * ch + c)] = c * tokens + t;
  }
  ag::Var seq = ag::reshape(ag::gather_flat(x, std::move(idx)), {tokens, ch});
  return ag::linear(seq, params.at("encoder.proj.weight"), params.at("encoder.proj.bias"));
}

}  // namespace voxtr
