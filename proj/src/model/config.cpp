#include "voxtr/model/config.hpp"

#include <cmath>

#include "voxtr/core/errors.hpp"

namespace voxtr {

std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kBase:
      return "base";
    case EncoderVariant::kTiny:
      return "tiny";
    case EncoderVariant::kResNet50:
      return "resnet50";
  }
  return "base";
}

EncoderVariant encoder_variant_from_string(const std::string& s) {
  if (s == "base") return EncoderVariant::kBase;
  if (s == "tiny") return EncoderVariant::kTiny;
  if (s == "resnet50") return EncoderVariant::kResNet50;
  throw ConfigError("unknown encoder variant '" + s + "'");
}

std::string to_string(VoxelHead h) { return h == VoxelHead::kCnn ? "cnn" : "mlp"; }

VoxelHead voxel_head_from_string(const std::string& s) {
  if (s == "cnn") return VoxelHead::kCnn;
  if (s == "mlp") return VoxelHead::kMlp;
  throw ConfigError("unknown voxel head '" + s + "'");
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void ModelConfig::validate() const {
  require(encoder.dim > 0 && decoder.dim > 0, "dims must be positive");
  require(encoder.patch_size > 0 && encoder.token_grid > 0, "patch geometry must be positive");
  require(encoder.layers > 0 && encoder.heads > 0, "encoder depth/heads must be positive");
  require(encoder.dim % encoder.heads == 0, "encoder dim not divisible by heads");
  require(decoder.layers > 0 && decoder.heads > 0, "decoder depth/heads must be positive");
  require(decoder.dim % decoder.heads == 0, "decoder dim not divisible by heads");
  require(decoder.dim == encoder.dim, "decoder dim must match encoder dim");
  require(decoder.query_side > 0, "query_side must be positive");
  require(resolution > 0, "resolution must be positive");
  if (encoder.variant == EncoderVariant::kResNet50) {
    // Stride-32 backbone: the image must cover the token grid exactly.
    require(encoder.patch_size == 32, "resnet50 backbone has effective stride 32");
  }

  if (head == VoxelHead::kCnn) {
    require(cnn.channels > 0 && cnn.upsample_stages > 0, "cnn decoder sizes must be positive");
    // Each transposed-conv stage must double the side exactly: the output
    // side s*(n-1) - 2p + k equals s*n iff k == s + 2p.
    require(cnn.kernel == cnn.stride + 2 * cnn.padding,
            "cnn upsample stage does not preserve side*stride arithmetic");
    long side = decoder.query_side;
    for (int i = 0; i < cnn.upsample_stages; ++i) side *= cnn.stride;
    require(side == resolution, "query_side * stride^stages != resolution");
    require(cnn.residual_kernels.size() == 3, "residual block uses exactly three convolutions");
    require(cnn.residual_kernels[0] == cnn.residual_kernels[1] && cnn.residual_kernels[0] % 2 == 1,
            "residual main-path kernels must be equal and odd");
    require(cnn.residual_kernels[2] == 1, "residual skip kernel must be 1");
  } else {
    require(resolution % decoder.query_side == 0, "resolution not divisible by query_side");
  }
}

ModelConfig ModelConfig::base() { return ModelConfig{}; }

ModelConfig ModelConfig::base_faithful() {
  ModelConfig cfg;
  cfg.encoder.patch_size = 14;
  cfg.encoder.token_grid = 16;
  return cfg;
}

ModelConfig ModelConfig::small() {
  ModelConfig cfg;
  cfg.encoder.variant = EncoderVariant::kTiny;
  cfg.encoder.heads = 3;
  cfg.encoder.dim = 192;
  cfg.decoder.layers = 6;
  cfg.decoder.heads = 3;
  cfg.decoder.dim = 192;
  return cfg;
}

ModelConfig ModelConfig::resnet() {
  ModelConfig cfg;
  cfg.encoder.variant = EncoderVariant::kResNet50;
  cfg.encoder.patch_size = 32;
  cfg.encoder.token_grid = 7;
  return cfg;
}

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.encoder.variant = EncoderVariant::kBase;
  cfg.encoder.layers = 3;
  cfg.encoder.heads = 4;
  cfg.encoder.dim = 64;
  cfg.encoder.patch_size = 16;
  cfg.encoder.token_grid = 4;
  cfg.encoder.pretrained = false;
  cfg.decoder.layers = 2;
  cfg.decoder.heads = 4;
  cfg.decoder.dim = 64;
  cfg.cnn.channels = 16;
  return cfg;
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"variant", to_string(c.variant)}, {"layers", c.layers},
                     {"heads", c.heads},                {"dim", c.dim},
                     {"patch_size", c.patch_size},      {"token_grid", c.token_grid},
                     {"pretrained", c.pretrained}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  EncoderConfig d;
  c.variant = encoder_variant_from_string(j.value("variant", to_string(d.variant)));
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.dim = j.value("dim", d.dim);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.token_grid = j.value("token_grid", d.token_grid);
  c.pretrained = j.value("pretrained", d.pretrained);
}

void to_json(nlohmann::json& j, const DecoderConfig& c) {
  j = nlohmann::json{
      {"layers", c.layers}, {"heads", c.heads}, {"dim", c.dim}, {"query_side", c.query_side}};
}

void from_json(const nlohmann::json& j, DecoderConfig& c) {
  DecoderConfig d;
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.dim = j.value("dim", d.dim);
  c.query_side = j.value("query_side", d.query_side);
}

void to_json(nlohmann::json& j, const CnnDecoderConfig& c) {
  j = nlohmann::json{{"channels", c.channels},
                     {"upsample_stages", c.upsample_stages},
                     {"kernel", c.kernel},
                     {"stride", c.stride},
                     {"padding", c.padding},
                     {"residual_kernels", c.residual_kernels}};
}

void from_json(const nlohmann::json& j, CnnDecoderConfig& c) {
  CnnDecoderConfig d;
  c.channels = j.value("channels", d.channels);
  c.upsample_stages = j.value("upsample_stages", d.upsample_stages);
  c.kernel = j.value("kernel", d.kernel);
  c.stride = j.value("stride", d.stride);
  c.padding = j.value("padding", d.padding);
  c.residual_kernels = j.value("residual_kernels", d.residual_kernels);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"encoder", c.encoder},
                     {"decoder", c.decoder},
                     {"cnn", c.cnn},
                     {"head", to_string(c.head)},
                     {"resolution", c.resolution}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
  if (j.contains("decoder")) j.at("decoder").get_to(c.decoder);
  if (j.contains("cnn")) j.at("cnn").get_to(c.cnn);
  c.head = voxel_head_from_string(j.value("head", to_string(d.head)));
  c.resolution = j.value("resolution", d.resolution);
}

}  // namespace voxtr
