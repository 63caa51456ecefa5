#include "voxtr/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "voxtr/core/errors.hpp"

namespace voxtr {

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read png " + path + ": " + png.message);
  }
  const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;

  Image img;
  img.height = png.height;
  img.width = png.width;
  img.channels = has_alpha ? 4 : 3;
  img.pixels.resize(static_cast<size_t>(PNG_IMAGE_SIZE(png)));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("failed decoding png " + path + ": " + png.message);
  }
  return img;
}

void write_png(const Image& img, const std::string& path) {
  if (img.channels != 3 && img.channels != 4) {
    throw std::invalid_argument("write_png wants 3 or 4 channels");
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write png " + path + ": " + png.message);
  }
}

Tensor preprocess_image(const Image& raw, const PreprocessConfig& cfg) {
  if (raw.height <= 0 || raw.width <= 0) throw std::invalid_argument("preprocess_image: zero-area image");
  if (raw.channels != 3 && raw.channels != 4) {
    throw std::invalid_argument("preprocess_image: want 3 or 4 channels, got " +
                                std::to_string(raw.channels));
  }
  const long h = raw.height, w = raw.width, s = cfg.target_size;

  // RGB in [0,1], alpha composited over the background fill.
  std::vector<double> rgb(static_cast<size_t>(h * w * 3));
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const double a = raw.channels == 4 ? raw.at(y, x, 3) / 255.0 : 1.0;
      for (long c = 0; c < 3; ++c) {
        const double fg = raw.at(y, x, c) / 255.0;
        rgb[static_cast<size_t>((y * w + x) * 3 + c)] = a * fg + (1.0 - a) * cfg.background_fill[c];
      }
    }
  }

  // Bilinear resize with half-pixel centers; the identity-size case maps
  // each pixel onto itself exactly.
  Tensor out({3, s, s});
  const double sy = static_cast<double>(h) / static_cast<double>(s);
  const double sx = static_cast<double>(w) / static_cast<double>(s);
  for (long oy = 0; oy < s; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const long y0 = static_cast<long>(fy);
    const long y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (long ox = 0; ox < s; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const long x0 = static_cast<long>(fx);
      const long x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (long c = 0; c < 3; ++c) {
        const double v00 = rgb[static_cast<size_t>((y0 * w + x0) * 3 + c)];
        const double v01 = rgb[static_cast<size_t>((y0 * w + x1) * 3 + c)];
        const double v10 = rgb[static_cast<size_t>((y1 * w + x0) * 3 + c)];
        const double v11 = rgb[static_cast<size_t>((y1 * w + x1) * 3 + c)];
        const double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        out[(c * s + oy) * s + ox] = (v - cfg.channel_means[c]) / cfg.channel_stds[c];
      }
    }
  }
  return out;
}

}  // namespace voxtr
