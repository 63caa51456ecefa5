#include "voxtr/model/decoder3d.hpp"

#include <vector>

#include "voxtr/core/errors.hpp"
#include "voxtr/model/blocks.hpp"

namespace voxtr {

ag::Var decode_queries(const ag::Var& memory, const DecoderConfig& cfg, const ParamStore& params) {
  if (memory->value.rank() != 2 || memory->value.dim(1) != cfg.dim) {
    throw ConfigError("decode_queries: memory shape " + shape_str(memory->value.shape()) +
                      " does not match decoder dim " + std::to_string(cfg.dim));
  }
  ag::Var x = params.at("decoder.query_embed");
  for (int l = 0; l < cfg.layers; ++l) {
    x = decoder_block(params, "decoder.layer" + std::to_string(l) + ".", x, memory, cfg.heads,
                      /*causal_self=*/false);
  }
  return layer_norm_named(params, "decoder.final_norm", x);
}

ag::Var reshape_to_cube(const ag::Var& grid, int query_side) {
  return ag::rows_to_cube(grid, query_side);
}

ag::Var residual_block(const ag::Var& x, const ParamStore& params, const std::string& prefix,
                       int kernel) {
  ag::Var main = ag::conv3d(x, params.at(prefix + "conv1.weight"),
                            params.at(prefix + "conv1.bias"), kernel, 1, (kernel - 1) / 2);
  main = ag::relu(main);
  main = ag::conv3d(main, params.at(prefix + "conv2.weight"),
                    params.at(prefix + "conv2.bias"), kernel, 1, (kernel - 1) / 2);
  ag::Var skip =
      ag::conv3d(x, params.at(prefix + "skip.weight"), params.at(prefix + "skip.bias"), 1, 1, 0);
  return ag::relu(ag::add(main, skip));
}

ag::Var cnn_decode(const ag::Var& cube, const CnnDecoderConfig& cfg, const ParamStore& params,
                   const std::string& prefix) {
  const int rk = cfg.residual_kernels.empty() ? 3 : cfg.residual_kernels[0];
  ag::Var x = ag::conv3d(cube, params.at(prefix + "in_proj.weight"),
                         params.at(prefix + "in_proj.bias"), 1, 1, 0);
  x = ag::relu(x);
  for (int i = 0; i < cfg.upsample_stages; ++i) {
    const std::string up = prefix + "up" + std::to_string(i + 1) + ".";
    x = ag::conv_transpose3d(x, params.at(up + "weight"), params.at(up + "bias"), cfg.kernel,
                             cfg.stride, cfg.padding);
    x = ag::relu(x);
    if (i < cfg.upsample_stages - 1) {
      x = residual_block(x, params, prefix + "res" + std::to_string(i + 1) + ".", rk);
    }
  }
  x = ag::conv3d(x, params.at(prefix + "head.weight"), params.at(prefix + "head.bias"), 1, 1, 0);
  const long side = x->value.dim(1);
  return ag::sigmoid(ag::reshape(x, {side, side, side}));
}

ag::Var mlp_decode(const ag::Var& grid, const ParamStore& params, int resolution, int query_side) {
  if (resolution % query_side != 0) {
    throw ConfigError("mlp_decode: resolution " + std::to_string(resolution) +
                      " not divisible by query side " + std::to_string(query_side));
  }
  const long r = resolution;
  const long m = query_side;
  const long sub = r / m;
  ag::Var act = ag::sigmoid(ag::linear(grid, params.at("mlp.weight"), params.at("mlp.bias")));
  // Voxel (x, y, z) reads position (x%sub, y%sub, z%sub) of the sub-block
  // emitted by the query at cube cell (x/sub, y/sub, z/sub).
  std::vector<long> idx(static_cast<size_t>(r * r * r));
  for (long x = 0; x < r; ++x) {
    for (long y = 0; y < r; ++y) {
      for (long z = 0; z < r; ++z) {
        const long q = ((x / sub) * m + (y / sub)) * m + (z / sub);
        const long w = ((x % sub) * sub + (y % sub)) * sub + (z % sub);
        idx[static_cast<size_t>((x * r + y) * r + z)] = q * (sub * sub * sub) + w;
      }
    }
  }
  return ag::reshape(ag::gather_flat(act, std::move(idx)), {r, r, r});
}

}  // namespace voxtr
