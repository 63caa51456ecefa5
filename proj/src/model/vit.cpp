#include "voxtr/model/vit.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "voxtr/model/resnet.hpp"

namespace voxtr {

Tensor patchify(const Tensor& image, const EncoderConfig& cfg) {
  const long s = cfg.image_size();
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != s || image.dim(2) != s) {
    throw std::invalid_argument("patchify: image shape " + shape_str(image.shape()) +
                                " does not match config side " + std::to_string(s));
  }
  const long g = cfg.token_grid;
  const long p = cfg.patch_size;
  Tensor out({g * g, 3 * p * p});
  for (long k = 0; k < g * g; ++k) {
    const long gy = k / g;
    const long gx = k % g;
    long col = 0;
    for (long c = 0; c < 3; ++c) {
      for (long py = 0; py < p; ++py) {
        for (long px = 0; px < p; ++px) {
          out[k * 3 * p * p + col++] = image[(c * s + gy * p + py) * s + gx * p + px];
        }
      }
    }
  }
  return out;
}

ag::Var encode_view(const Tensor& view, const EncoderConfig& cfg, const ParamStore& params) {
  if (cfg.variant == EncoderVariant::kResNet50) {
    return encode_backbone_resnet(view, cfg, params);
  }
  Tensor patches = patchify(view, cfg);
  ag::Var x = ag::linear(ag::constant(std::move(patches)), params.at("encoder.patch_proj.weight"),
                         params.at("encoder.patch_proj.bias"));
  x = ag::add(x, params.at("encoder.pos_embed"));
  for (int l = 0; l < cfg.layers; ++l) {
    x = encoder_block(params, "encoder.layer" + std::to_string(l) + ".", x, cfg.heads);
  }
  return layer_norm_named(params, "encoder.final_norm", x);
}

ag::Var pool_views(const std::vector<ag::Var>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("pool_views: empty view list");
  for (const ag::Var& s : seqs) {
    if (!s->value.same_shape(seqs.front()->value)) {
      throw std::invalid_argument("pool_views: mismatched token shapes " +
                                  shape_str(s->value.shape()) + " vs " +
                                  shape_str(seqs.front()->value.shape()));
    }
  }
  // Content-sorted summation order: permuting the argument list permutes
  // only bitwise-identical entries among themselves, so the mean is exact
  // under reordering.
  std::vector<size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const std::vector<double>& va = seqs[a]->value.vec();
    const std::vector<double>& vb = seqs[b]->value.vec();
    return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end());
  });
  std::vector<ag::Var> sorted;
  sorted.reserve(seqs.size());
  for (size_t i : order) sorted.push_back(seqs[i]);
  return ag::mean_stack(sorted);
}

}  // namespace voxtr
