#include "voxtr/model/pretrained.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <utility>
#include <vector>

#include "voxtr/core/archive.hpp"
#include "voxtr/core/errors.hpp"

namespace voxtr {

namespace {

std::string subst_layer(std::string s, int layer) {
  const std::string tag = "{L}";
  const std::string num = std::to_string(layer);
  for (size_t pos = s.find(tag); pos != std::string::npos; pos = s.find(tag, pos)) {
    s.replace(pos, tag.size(), num);
    pos += num.size();
  }
  return s;
}

// One archive tensor lands on one target, or on three (fused qkv).
struct MapEntry {
  std::string source;
  std::vector<std::string> targets;
};

std::vector<MapEntry> expand_name_map(const std::string& path, int layers) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open name map '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ImportError("name map '" + path + "' is not valid JSON: " + e.what());
  }
  std::vector<MapEntry> out;
  if (j.contains("direct")) {
    for (const auto& [src, dst] : j.at("direct").items()) {
      out.push_back({src, {dst.get<std::string>()}});
    }
  }
  if (j.contains("per_layer")) {
    for (const auto& [src, dst] : j.at("per_layer").items()) {
      for (int l = 0; l < layers; ++l) {
        out.push_back({subst_layer(src, l), {subst_layer(dst.get<std::string>(), l)}});
      }
    }
  }
  if (j.contains("qkv_split")) {
    for (const auto& [src, dst] : j.at("qkv_split").items()) {
      for (int l = 0; l < layers; ++l) {
        MapEntry e{subst_layer(src, l), {}};
        for (const auto& t : dst) e.targets.push_back(subst_layer(t.get<std::string>(), l));
        if (e.targets.size() != 3) {
          throw ImportError("name map qkv entry '" + src + "' must list three targets");
        }
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

long int_sqrt(long n) {
  long r = static_cast<long>(std::lround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

// Drops leading class/distillation rows and resizes the positional grid to
// the configured token count.
Tensor adapt_pos_embed(const Tensor& src, const EncoderConfig& cfg, const std::string& key) {
  if (src.rank() != 2 || src.dim(1) != cfg.dim) {
    throw ImportError("tensor '" + key + "' has shape " + shape_str(src.shape()) +
                      ", expected positional table of width " + std::to_string(cfg.dim));
  }
  const long rows = src.dim(0);
  const long want = cfg.tokens();
  for (long extra = 0; extra <= 2; ++extra) {
    if (rows - extra != want) continue;
    Tensor out({want, static_cast<long>(cfg.dim)});
    std::copy(src.data() + extra * cfg.dim, src.data() + rows * cfg.dim, out.data());
    return out;
  }
  for (long extra = 0; extra <= 2; ++extra) {
    const long g = int_sqrt(rows - extra);
    if (g < 1 || g * g != rows - extra) continue;
    Tensor grid({g * g, static_cast<long>(cfg.dim)});
    std::copy(src.data() + extra * cfg.dim, src.data() + rows * cfg.dim, grid.data());
    return interpolate_pos_grid(grid, g, cfg.token_grid);
  }
  throw ImportError("tensor '" + key + "' has " + std::to_string(rows) +
                    " positional rows; cannot map onto a " + std::to_string(cfg.token_grid) +
                    "x" + std::to_string(cfg.token_grid) + " token grid");
}

void store_tensor(ParamStore& params, const std::string& target, Tensor t,
                  const std::string& key) {
  const ag::Var& var = params.at(target);
  if (t.shape() != var->value.shape()) {
    throw ImportError("tensor '" + key + "' has shape " + shape_str(t.shape()) +
                      ", expected " + shape_str(var->value.shape()) + " for '" + target + "'");
  }
  var->value = std::move(t);
}

}  // namespace

std::string default_name_map_path(EncoderVariant variant) {
  return variant == EncoderVariant::kResNet50 ? "data/resnet50_name_map.json"
                                              : "data/deit_name_map.json";
}

Tensor interpolate_pos_grid(const Tensor& src, long src_grid, long dst_grid) {
  const long d = src.dim(1);
  Tensor out({dst_grid * dst_grid, d});
  for (long gy = 0; gy < dst_grid; ++gy) {
    for (long gx = 0; gx < dst_grid; ++gx) {
      const double fy = dst_grid > 1
                            ? static_cast<double>(gy) * (src_grid - 1) / (dst_grid - 1)
                            : 0.0;
      const double fx = dst_grid > 1
                            ? static_cast<double>(gx) * (src_grid - 1) / (dst_grid - 1)
                            : 0.0;
      const long y0 = static_cast<long>(fy);
      const long x0 = static_cast<long>(fx);
      const long y1 = std::min(y0 + 1, src_grid - 1);
      const long x1 = std::min(x0 + 1, src_grid - 1);
      const double wy = fy - static_cast<double>(y0);
      const double wx = fx - static_cast<double>(x0);
      for (long c = 0; c < d; ++c) {
        const double top = (1.0 - wx) * src[(y0 * src_grid + x0) * d + c] +
                           wx * src[(y0 * src_grid + x1) * d + c];
        const double bot = (1.0 - wx) * src[(y1 * src_grid + x0) * d + c] +
                           wx * src[(y1 * src_grid + x1) * d + c];
        out[(gy * dst_grid + gx) * d + c] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

void load_pretrained_encoder(ParamStore& params, const std::string& archive_path,
                             const EncoderConfig& cfg, const std::string& name_map_path) {
  const std::string map_path =
      name_map_path.empty() ? default_name_map_path(cfg.variant) : name_map_path;
  const std::vector<MapEntry> mapping = expand_name_map(map_path, cfg.layers);
  const TensorArchive archive = TensorArchive::load(archive_path);

  for (const MapEntry& entry : mapping) {
    if (!archive.contains(entry.source)) {
      throw ImportError("missing tensor '" + entry.source + "' in '" + archive_path + "'");
    }
    Tensor t = archive.get(entry.source);

    if (entry.targets.size() == 3) {
      // Fused qkv: rows are the q, k, v projections stacked.
      const Shape& want = params.at(entry.targets[0])->value.shape();
      const long rows = want[0];
      if (t.dim(0) != 3 * rows || (t.rank() == 2 && want.size() == 2 && t.dim(1) != want[1]) ||
          t.rank() != static_cast<int>(want.size())) {
        throw ImportError("tensor '" + entry.source + "' has shape " + shape_str(t.shape()) +
                          ", expected fused stack of three " + shape_str(want));
      }
      const long chunk = t.numel() / 3;
      for (int i = 0; i < 3; ++i) {
        Tensor part(want);
        std::copy(t.data() + i * chunk, t.data() + (i + 1) * chunk, part.data());
        store_tensor(params, entry.targets[i], std::move(part), entry.source);
      }
      continue;
    }

    const std::string& target = entry.targets[0];
    if (target == "encoder.pos_embed") {
      store_tensor(params, target, adapt_pos_embed(t, cfg, entry.source), entry.source);
      continue;
    }
    if (target == "encoder.patch_proj.weight" && t.rank() == 4) {
      t = t.reshaped({t.dim(0), t.dim(1) * t.dim(2) * t.dim(3)});
    }
    store_tensor(params, target, std::move(t), entry.source);
  }
}

}  // namespace voxtr
