#include "voxtr/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"
#include "voxtr/voxel/binvox.hpp"

namespace voxtr {

namespace fs = std::filesystem;

ViewSet sample_views(const SampleRecord& record, long v, uint64_t seed,
                     const PreprocessConfig& cfg) {
  const long available = static_cast<long>(record.view_paths.size());
  if (v < 1 || v > available) {
    throw std::invalid_argument("sample_views: V=" + std::to_string(v) + " with " +
                                std::to_string(available) + " views for " + record.object_id);
  }
  Rng rng(mix_seed(seed, hash_string(record.object_id)));
  const std::vector<long> picks = rng.sample_without_replacement(available, v);

  ViewSet out;
  out.object_id = record.object_id;
  out.category = record.category;
  out.images.reserve(static_cast<size_t>(v));
  for (long idx : picks) {
    out.images.push_back(preprocess_image(read_png(record.view_paths[static_cast<size_t>(idx)]), cfg));
  }
  return out;
}

namespace {

// First occupied cell along a +axis or -axis ray; -1 when the ray is empty.
long first_hit_axis(const VoxelGrid& g, int axis, bool positive, long a, long b) {
  const long n = g.resolution();
  for (long i = 0; i < n; ++i) {
    const long t = positive ? i : n - 1 - i;
    long x = 0, y = 0, z = 0;
    switch (axis) {
      case 0: x = t; y = a; z = b; break;
      case 1: x = a; y = t; z = b; break;
      default: x = a; y = b; z = t; break;
    }
    if (g.get(x, y, z)) return i;
  }
  return -1;
}

uint8_t shade(long depth, long depth_range) {
  // 32 (nearest) .. 192 (farthest); background stays at 255.
  return static_cast<uint8_t>(32 + (160 * depth) / std::max<long>(depth_range, 1));
}

void fill_block(Image& img, long r, long c, long size, uint8_t v) {
  for (long dr = 0; dr < size; ++dr) {
    for (long dc = 0; dc < size; ++dc) {
      img.at(r + dr, c + dc, 0) = v;
      img.at(r + dr, c + dc, 1) = v;
      img.at(r + dr, c + dc, 2) = v;
    }
  }
}

}  // namespace

Image render_toy_view(const VoxelGrid& grid, int view_index) {
  const long n = grid.resolution();
  const long s = 2 * n;
  Image img;
  img.height = s;
  img.width = s;
  img.channels = 3;
  img.pixels.assign(static_cast<size_t>(s * s * 3), 255);

  if (view_index >= 0 && view_index < 6) {
    const int axis = view_index / 2;
    const bool positive = view_index % 2 == 0;
    for (long a = 0; a < n; ++a) {
      for (long b = 0; b < n; ++b) {
        const long hit = first_hit_axis(grid, axis, positive, a, b);
        if (hit < 0) continue;
        // rows follow b, cols follow a; negative views mirror the columns
        // so a shape's two sides produce distinct images.
        const long col = positive ? a : n - 1 - a;
        fill_block(img, 2 * b, 2 * col, 2, shade(hit, n - 1));
      }
    }
    return img;
  }
  if (view_index == 6 || view_index == 7) {
    // Shear projection: cells sharing u collapse to one pixel column.
    // view 6 marches along (1,1,0) with u = x - y + n - 1, depth x + y;
    // view 7 marches along (1,-1,0) with u = x + y, depth x - y + n - 1.
    for (long z = 0; z < n; ++z) {
      for (long u = 0; u < 2 * n - 1; ++u) {
        long best = -1;
        for (long x = 0; x < n; ++x) {
          const long y = view_index == 6 ? x - (u - (n - 1)) : u - x;
          if (y < 0 || y >= n || !grid.get(x, y, z)) continue;
          const long depth = view_index == 6 ? x + y : x - y + n - 1;
          if (best < 0 || depth < best) best = depth;
        }
        if (best < 0) continue;
        fill_block(img, 2 * z, u, 1, shade(best, 2 * n - 2));
        fill_block(img, 2 * z + 1, u, 1, shade(best, 2 * n - 2));
      }
    }
    return img;
  }
  throw std::invalid_argument("render_toy_view: view index " + std::to_string(view_index) +
                              " out of range [0, 8)");
}

namespace {

VoxelGrid toy_grid(int kind, long n, Rng& rng) {
  VoxelGrid g(n);
  auto fill_box = [&](long x0, long x1, long y0, long y1, long z0, long z1) {
    for (long x = x0; x <= x1; ++x) {
      for (long y = y0; y <= y1; ++y) {
        for (long z = z0; z <= z1; ++z) g.set(x, y, z, true);
      }
    }
  };
  auto span = [&](long& lo, long& hi) {
    lo = 1 + rng.uniform_int(n / 4);
    hi = lo + n / 3 + rng.uniform_int(n / 3);
    hi = std::min(hi, n - 2);
  };
  if (kind == 0) {  // cuboid
    long x0, x1, y0, y1, z0, z1;
    span(x0, x1);
    span(y0, y1);
    span(z0, z1);
    fill_box(x0, x1, y0, y1, z0, z1);
  } else if (kind == 1) {  // sphere
    const double c = (n - 1) / 2.0;
    const double cx = c + rng.uniform(-n / 8.0, n / 8.0);
    const double cy = c + rng.uniform(-n / 8.0, n / 8.0);
    const double cz = c + rng.uniform(-n / 8.0, n / 8.0);
    const double r = n / 4.0 + rng.uniform(0.0, n / 8.0);
    for (long x = 0; x < n; ++x) {
      for (long y = 0; y < n; ++y) {
        for (long z = 0; z < n; ++z) {
          const double dx = x - cx, dy = y - cy, dz = z - cz;
          if (dx * dx + dy * dy + dz * dz <= r * r) g.set(x, y, z, true);
        }
      }
    }
  } else {  // L-shape: a vertical post plus a horizontal arm
    long x0, x1, y0, y1, z0, z1;
    span(x0, x1);
    span(y0, y1);
    span(z0, z1);
    const long xm = std::min(x0 + std::max<long>(1, (x1 - x0) / 3), x1);
    const long zm = std::min(z0 + std::max<long>(1, (z1 - z0) / 3), z1);
    fill_box(x0, xm, y0, y1, z0, z1);  // post
    fill_box(x0, x1, y0, y1, z0, zm);  // arm
  }
  return g;
}

const char* toy_category(int kind) {
  switch (kind) {
    case 0: return "toy_cuboid";
    case 1: return "toy_sphere";
    default: return "toy_l";
  }
}

}  // namespace

std::vector<ToySample> make_toy_dataset(long n, uint64_t seed, long resolution, int views) {
  if (n < 1) throw std::invalid_argument("make_toy_dataset: n must be >= 1");
  if (views < 1 || views > 8) throw std::invalid_argument("make_toy_dataset: views must lie in [1, 8]");

  PreprocessConfig cfg;
  cfg.target_size = 2 * resolution;

  std::vector<ToySample> out;
  out.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
    const int kind = static_cast<int>(i % 3);
    ToySample sample{ViewSet{}, toy_grid(kind, resolution, rng)};
    char id[32];
    std::snprintf(id, sizeof id, "obj_%03ld", i);
    sample.views.object_id = id;
    sample.views.category = toy_category(kind);
    for (int v = 0; v < views; ++v) {
      sample.views.images.push_back(preprocess_image(render_toy_view(sample.voxel, v), cfg));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void write_toy_dataset(const std::string& dir, long n, uint64_t seed, long resolution, int views) {
  if (n < 1) throw std::invalid_argument("write_toy_dataset: n must be >= 1");
  if (views < 1 || views > 8) throw std::invalid_argument("write_toy_dataset: views must lie in [1, 8]");

  std::vector<std::string> split_lines;
  for (long i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
    const int kind = static_cast<int>(i % 3);
    const VoxelGrid grid = toy_grid(kind, resolution, rng);
    char id[32];
    std::snprintf(id, sizeof id, "obj_%03ld", i);

    const fs::path obj_dir = fs::path(dir) / toy_category(kind) / id;
    fs::create_directories(obj_dir / "rendering");
    for (int v = 0; v < views; ++v) {
      char name[16];
      std::snprintf(name, sizeof name, "%02d.png", v);
      write_png(render_toy_view(grid, v), (obj_dir / "rendering" / name).string());
    }
    write_binvox_file(grid, (obj_dir / "model.binvox").string());
    split_lines.push_back(std::string(toy_category(kind)) + "/" + id);
  }

  fs::create_directories(fs::path(dir) / "splits");
  for (const char* split : {"train", "val", "test"}) {
    std::ofstream out(fs::path(dir) / "splits" / (std::string(split) + ".txt"));
    if (!out) throw IoError("cannot write split file for " + std::string(split));
    for (const auto& line : split_lines) out << line << "\n";
  }
}

}  // namespace voxtr
