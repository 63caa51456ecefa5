#ifndef VOXTR_DATA_IMAGE_HPP_
#define VOXTR_DATA_IMAGE_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxtr/core/tensor.hpp"

namespace voxtr {

// 8-bit interleaved (HWC) image, 3 (RGB) or 4 (RGBA) channels.
struct Image {
  long height = 0;
  long width = 0;
  long channels = 3;
  std::vector<uint8_t> pixels;

  uint8_t& at(long y, long x, long c) {
    return pixels[static_cast<size_t>((y * width + x) * channels + c)];
  }
  uint8_t at(long y, long x, long c) const {
    return pixels[static_cast<size_t>((y * width + x) * channels + c)];
  }
};

Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

struct PreprocessConfig {
  long target_size = 224;                                   // S; must match the encoder's patch grid
  std::array<double, 3> channel_means{0.485, 0.456, 0.406};  // pretrained-encoder statistics
  std::array<double, 3> channel_stds{0.229, 0.224, 0.225};
  std::array<double, 3> background_fill{1.0, 1.0, 1.0};      // white, in [0,1]
};

// RGBA composited over background_fill, bilinearly resized (half-pixel
// centers) to S x S, then per-channel (v - mean)/std. Returns [3, S, S].
// Throws std::invalid_argument on zero-area input or channel counts other
// than 3/4.
Tensor preprocess_image(const Image& raw, const PreprocessConfig& cfg);

}  // namespace voxtr

#endif  // VOXTR_DATA_IMAGE_HPP_
