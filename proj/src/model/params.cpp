#include "voxtr/model/params.hpp"

#include <cmath>
#include <set>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"

namespace voxtr {

namespace {

void add(std::vector<ParamSpec>& out, std::string name, Shape shape, Init init, long fan_in = 0,
         bool trainable = true) {
  out.push_back(ParamSpec{std::move(name), std::move(shape), init, trainable, fan_in});
}

void add_norm(std::vector<ParamSpec>& out, const std::string& prefix, int dim) {
  add(out, prefix + ".gamma", {dim}, Init::kOnes);
  add(out, prefix + ".beta", {dim}, Init::kZeros);
}

void add_attn(std::vector<ParamSpec>& out, const std::string& prefix, int dim) {
  for (const char* proj : {"wq", "wk", "wv", "wo"}) {
    add(out, prefix + proj + ".weight", {dim, dim}, Init::kTruncNormal);
    add(out, prefix + proj + ".bias", {dim}, Init::kZeros);
  }
}

void add_ffn(std::vector<ParamSpec>& out, const std::string& prefix, int dim) {
  add(out, prefix + "fc1.weight", {4 * dim, dim}, Init::kTruncNormal);
  add(out, prefix + "fc1.bias", {4 * dim}, Init::kZeros);
  add(out, prefix + "fc2.weight", {dim, 4 * dim}, Init::kTruncNormal);
  add(out, prefix + "fc2.bias", {dim}, Init::kZeros);
}

void add_bn(std::vector<ParamSpec>& out, const std::string& prefix, int ch) {
  add(out, prefix + ".gamma", {ch}, Init::kOnes);
  add(out, prefix + ".beta", {ch}, Init::kZeros);
  add(out, prefix + ".running_mean", {ch}, Init::kZeros, 0, /*trainable=*/false);
  add(out, prefix + ".running_var", {ch}, Init::kOnes, 0, /*trainable=*/false);
}

std::vector<ParamSpec> vit_param_specs(const EncoderConfig& cfg) {
  std::vector<ParamSpec> out;
  const int d = cfg.dim;
  const int patch_in = 3 * cfg.patch_size * cfg.patch_size;
  add(out, "encoder.patch_proj.weight", {d, patch_in}, Init::kTruncNormal);
  add(out, "encoder.patch_proj.bias", {d}, Init::kZeros);
  add(out, "encoder.pos_embed", {cfg.tokens(), d}, Init::kTruncNormal);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    add_norm(out, p + "norm1", d);
    add_attn(out, p + "attn.", d);
    add_norm(out, p + "norm2", d);
    add_ffn(out, p + "ffn.", d);
  }
  add_norm(out, "encoder.final_norm", d);
  return out;
}

std::vector<ParamSpec> resnet50_param_specs(const EncoderConfig& cfg) {
  std::vector<ParamSpec> out;
  add(out, "encoder.backbone.conv1.weight", {64, 3, 7, 7}, Init::kKaiming, 3 * 7 * 7);
  add_bn(out, "encoder.backbone.bn1", 64);
  const int counts[4] = {3, 4, 6, 3};
  const int widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int w = widths[stage];
    const int out_ch = 4 * w;
    for (int block = 0; block < counts[stage]; ++block) {
      const std::string p = "encoder.backbone.layer" + std::to_string(stage + 1) + "." +
                            std::to_string(block) + ".";
      add(out, p + "conv1.weight", {w, in_ch, 1, 1}, Init::kKaiming, in_ch);
      add_bn(out, p + "bn1", w);
      add(out, p + "conv2.weight", {w, w, 3, 3}, Init::kKaiming, w * 9);
      add_bn(out, p + "bn2", w);
      add(out, p + "conv3.weight", {out_ch, w, 1, 1}, Init::kKaiming, w);
      add_bn(out, p + "bn3", out_ch);
      if (block == 0) {
        add(out, p + "downsample.conv.weight", {out_ch, in_ch, 1, 1}, Init::kKaiming, in_ch);
        add_bn(out, p + "downsample.bn", out_ch);
      }
      in_ch = out_ch;
    }
  }
  add(out, "encoder.proj.weight", {cfg.dim, in_ch}, Init::kTruncNormal);
  add(out, "encoder.proj.bias", {cfg.dim}, Init::kZeros);
  return out;
}

}  // namespace

std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& cfg) {
  if (cfg.variant == EncoderVariant::kResNet50) return resnet50_param_specs(cfg);
  return vit_param_specs(cfg);
}

std::vector<ParamSpec> decoder_block_specs(const std::string& prefix, int dim) {
  std::vector<ParamSpec> out;
  add_norm(out, prefix + "norm1", dim);
  add_attn(out, prefix + "self_attn.", dim);
  add_norm(out, prefix + "norm2", dim);
  add_attn(out, prefix + "cross_attn.", dim);
  add_norm(out, prefix + "norm3", dim);
  add_ffn(out, prefix + "ffn.", dim);
  return out;
}

std::vector<ParamSpec> norm_specs(const std::string& prefix, int dim) {
  std::vector<ParamSpec> out;
  add_norm(out, prefix, dim);
  return out;
}

std::vector<ParamSpec> decoder_param_specs(const DecoderConfig& cfg) {
  std::vector<ParamSpec> out;
  const int d = cfg.dim;
  add(out, "decoder.query_embed", {cfg.queries(), d}, Init::kTruncNormal);
  for (int l = 0; l < cfg.layers; ++l) {
    std::vector<ParamSpec> block =
        decoder_block_specs("decoder.layer" + std::to_string(l) + ".", d);
    out.insert(out.end(), block.begin(), block.end());
  }
  add_norm(out, "decoder.final_norm", d);
  return out;
}

std::vector<ParamSpec> cnn_param_specs(const CnnDecoderConfig& cfg, int in_dim,
                                       const std::string& prefix) {
  std::vector<ParamSpec> out;
  const int c = cfg.channels;
  const int k = cfg.kernel;
  const int rk = cfg.residual_kernels.empty() ? 3 : cfg.residual_kernels[0];
  add(out, prefix + "in_proj.weight", {c, in_dim, 1, 1, 1}, Init::kKaiming, in_dim);
  add(out, prefix + "in_proj.bias", {c}, Init::kZeros);
  for (int i = 0; i < cfg.upsample_stages; ++i) {
    const std::string p = prefix + "up" + std::to_string(i + 1) + ".";
    // Transposed-conv weight layout is [in, out, k, k, k].
    add(out, p + "weight", {c, c, k, k, k}, Init::kKaiming, c * k * k * k);
    add(out, p + "bias", {c}, Init::kZeros);
  }
  for (int i = 0; i < cfg.upsample_stages - 1; ++i) {
    const std::string p = prefix + "res" + std::to_string(i + 1) + ".";
    add(out, p + "conv1.weight", {c, c, rk, rk, rk}, Init::kKaiming, c * rk * rk * rk);
    add(out, p + "conv1.bias", {c}, Init::kZeros);
    add(out, p + "conv2.weight", {c, c, rk, rk, rk}, Init::kKaiming, c * rk * rk * rk);
    add(out, p + "conv2.bias", {c}, Init::kZeros);
    add(out, p + "skip.weight", {c, c, 1, 1, 1}, Init::kKaiming, c);
    add(out, p + "skip.bias", {c}, Init::kZeros);
  }
  add(out, prefix + "head.weight", {1, c, 1, 1, 1}, Init::kKaiming, c);
  add(out, prefix + "head.bias", {1}, Init::kZeros);
  return out;
}

std::vector<ParamSpec> mlp_param_specs(int dim, int sub_block_cells) {
  std::vector<ParamSpec> out;
  add(out, "mlp.weight", {sub_block_cells, dim}, Init::kTruncNormal);
  add(out, "mlp.bias", {sub_block_cells}, Init::kZeros);
  return out;
}

std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> out = encoder_param_specs(cfg.encoder);
  std::vector<ParamSpec> dec = decoder_param_specs(cfg.decoder);
  out.insert(out.end(), dec.begin(), dec.end());
  if (cfg.head == VoxelHead::kCnn) {
    std::vector<ParamSpec> head = cnn_param_specs(cfg.cnn, cfg.decoder.dim);
    out.insert(out.end(), head.begin(), head.end());
  } else {
    const int sub = cfg.resolution / cfg.decoder.query_side;
    std::vector<ParamSpec> head = mlp_param_specs(cfg.decoder.dim, sub * sub * sub);
    out.insert(out.end(), head.begin(), head.end());
  }
  return out;
}

long count_params(const std::vector<ParamSpec>& specs) {
  long total = 0;
  for (const ParamSpec& s : specs) {
    if (s.trainable) total += shape_numel(s.shape);
  }
  return total;
}

long count_params(const ModelConfig& cfg) {
  cfg.validate();
  return count_params(model_param_specs(cfg));
}

long count_encoder_params(const EncoderConfig& cfg) {
  return count_params(encoder_param_specs(cfg));
}

ParamStore ParamStore::init(const std::vector<ParamSpec>& specs, uint64_t seed) {
  ParamStore store;
  for (const ParamSpec& spec : specs) {
    Tensor t(spec.shape);
    Rng rng(mix_seed(seed, hash_string(spec.name)));
    switch (spec.init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        t.fill(1.0);
        break;
      case Init::kTruncNormal:
        for (double& v : t.vec()) v = rng.truncated_normal(0.02);
        break;
      case Init::kKaiming: {
        if (spec.fan_in <= 0) throw ConfigError("kaiming init without fan_in: " + spec.name);
        const double std_dev = std::sqrt(2.0 / static_cast<double>(spec.fan_in));
        for (double& v : t.vec()) v = rng.normal() * std_dev;
        break;
      }
    }
    store.insert(spec.name, ag::leaf(std::move(t), spec.trainable));
  }
  return store;
}

const ag::Var& ParamStore::at(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return vars_.count(name) > 0; }

void ParamStore::insert(const std::string& name, ag::Var var) {
  if (!vars_.emplace(name, std::move(var)).second) {
    throw ConfigError("duplicate parameter '" + name + "'");
  }
}

long ParamStore::trainable_count() const {
  long total = 0;
  for (const auto& [name, var] : vars_) {
    if (var->requires_grad) total += var->value.numel();
  }
  return total;
}

void ParamStore::zero_grads() const {
  for (const auto& [name, var] : vars_) var->zero_grad();
}

void ParamStore::check_matches(const std::vector<ParamSpec>& specs) const {
  std::set<std::string> expected;
  for (const ParamSpec& spec : specs) {
    expected.insert(spec.name);
    auto it = vars_.find(spec.name);
    if (it == vars_.end()) throw ConfigError("missing parameter '" + spec.name + "'");
    const ag::Var& var = it->second;
    if (var->value.shape() != spec.shape) {
      throw ConfigError("parameter '" + spec.name + "' has shape " +
                        shape_str(var->value.shape()) + ", expected " + shape_str(spec.shape));
    }
    if (var->requires_grad != spec.trainable) {
      throw ConfigError("parameter '" + spec.name + "' trainability mismatch");
    }
  }
  for (const auto& [name, var] : vars_) {
    if (!expected.count(name)) throw ConfigError("unexpected parameter '" + name + "'");
  }
}

}  // namespace voxtr
