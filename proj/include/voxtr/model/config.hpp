#ifndef VOXTR_MODEL_CONFIG_HPP_
#define VOXTR_MODEL_CONFIG_HPP_

#include <string>
#include <vector>

#include <json.hpp>

namespace voxtr {

enum class EncoderVariant { kBase, kTiny, kResNet50 };

std::string to_string(EncoderVariant v);
EncoderVariant encoder_variant_from_string(const std::string& s);

// Patch-transformer image encoder geometry. The preprocessed image side is
// patch_size * token_grid and the encoder emits token_grid^2 tokens of
// width dim. For the ResNet backbone, patch_size is the effective stride
// (32) and token_grid the feature-map side.
struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::kBase;
  int layers = 12;
  int heads = 12;
  int dim = 768;
  int patch_size = 16;
  int token_grid = 14;
  bool pretrained = true;

  int image_size() const { return patch_size * token_grid; }
  int tokens() const { return token_grid * token_grid; }
};

// Parallel transformer decoder over query_side^3 learned queries.
struct DecoderConfig {
  int layers = 8;
  int heads = 12;
  int dim = 768;
  int query_side = 4;

  int queries() const { return query_side * query_side * query_side; }
};

// Transposed-convolution voxel decoder: a 1x1x1 channel bridge, then
// upsample_stages doubling stages interleaved with residual blocks, then a
// 1x1x1 single-channel head. query_side * stride^upsample_stages must equal
// the output resolution.
struct CnnDecoderConfig {
  int channels = 64;
  int upsample_stages = 3;
  int kernel = 4;
  int stride = 2;
  int padding = 1;
  std::vector<int> residual_kernels = {3, 3, 1};
};

enum class VoxelHead { kCnn, kMlp };

std::string to_string(VoxelHead h);
VoxelHead voxel_head_from_string(const std::string& s);

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  CnnDecoderConfig cnn;
  VoxelHead head = VoxelHead::kCnn;
  int resolution = 32;

  // Throws ConfigError on any inconsistency (dim/head divisibility, patch
  // tiling, upsampling arithmetic not reaching `resolution`, ...).
  void validate() const;

  // 163M-parameter configuration: 12-layer encoder (768 dim, 12 heads,
  // patch 16 on 224^2 images) and an 8-layer decoder.
  static ModelConfig base();
  // base() with the alternative 16x16 token grid (patch 14); pretrained
  // positional embeddings are spatially interpolated on import.
  static ModelConfig base_faithful();
  // 11M-parameter configuration: 192-dim encoder and a 6-layer decoder.
  static ModelConfig small();
  // ResNet-50 backbone in place of the patch transformer.
  static ModelConfig resnet();
  // Desk-scale configuration for toy-dataset runs and tests: 64^2 images,
  // 16 tokens, 64-dim transformer, 16-channel voxel decoder.
  static ModelConfig toy();
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const DecoderConfig& c);
void from_json(const nlohmann::json& j, DecoderConfig& c);
void to_json(nlohmann::json& j, const CnnDecoderConfig& c);
void from_json(const nlohmann::json& j, CnnDecoderConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace voxtr

#endif  // VOXTR_MODEL_CONFIG_HPP_
