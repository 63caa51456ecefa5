#include "voxtr/model/vqvae.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

#include "voxtr/core/errors.hpp"
#include "voxtr/loss/losses.hpp"
#include "voxtr/model/blocks.hpp"
#include "voxtr/model/decoder3d.hpp"
#include "voxtr/model/vit.hpp"

namespace voxtr {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Tensor grid_input(const VoxelGrid& grid) {
  const long r = grid.resolution();
  Tensor x({1, r, r, r});
  for (long i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(grid.occupancy()[static_cast<size_t>(i)]);
  return x;
}

void check_codes(const std::vector<long>& codes, long want, long k) {
  if (static_cast<long>(codes.size()) != want) {
    throw std::invalid_argument("code sequence has " + std::to_string(codes.size()) +
                                " entries, expected " + std::to_string(want));
  }
  for (long c : codes) {
    if (c < 0 || c >= k) {
      throw std::invalid_argument("code " + std::to_string(c) + " outside [0, " +
                                  std::to_string(k) + ")");
    }
  }
}

}  // namespace

void VQConfig::validate() const {
  require(codebook_size >= 2, "codebook needs at least two entries");
  require(code_dim > 0, "code_dim must be positive");
  require(encoder_layers >= 1 && decoder_layers >= 1, "layer counts must be positive");
  require(static_cast<int>(encoder_channels.size()) == encoder_layers - 1,
          "encoder_channels must list the widths before the code_dim layer");
  for (int c : encoder_channels) require(c > 0, "encoder channel widths must be positive");
  require(decoder_channels > 0, "decoder_channels must be positive");
  require(commitment_weight > 0.0, "commitment_weight must be positive");
  require(resolution % (1 << encoder_layers) == 0 && latent_side() >= 1,
          "resolution not divisible by the encoder's stride");
  require((latent_side() << decoder_layers) == resolution,
          "latent_side * 2^decoder_layers != resolution");
}

VQConfig VQConfig::toy() {
  VQConfig cfg;
  cfg.codebook_size = 32;
  cfg.code_dim = 32;
  cfg.encoder_channels = {8, 16};
  cfg.decoder_channels = 12;
  return cfg;
}

void to_json(nlohmann::json& j, const VQConfig& c) {
  j = nlohmann::json{{"codebook_size", c.codebook_size},
                     {"code_dim", c.code_dim},
                     {"encoder_layers", c.encoder_layers},
                     {"decoder_layers", c.decoder_layers},
                     {"commitment_weight", c.commitment_weight},
                     {"encoder_channels", c.encoder_channels},
                     {"decoder_channels", c.decoder_channels},
                     {"resolution", c.resolution}};
}

void from_json(const nlohmann::json& j, VQConfig& c) {
  c.codebook_size = j.value("codebook_size", c.codebook_size);
  c.code_dim = j.value("code_dim", c.code_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.commitment_weight = j.value("commitment_weight", c.commitment_weight);
  c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
  c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
  c.resolution = j.value("resolution", c.resolution);
}

std::vector<ParamSpec> vqvae_param_specs(const VQConfig& cfg) {
  std::vector<ParamSpec> out;
  std::vector<int> widths = cfg.encoder_channels;
  widths.push_back(cfg.code_dim);
  int in_ch = 1;
  for (size_t i = 0; i < widths.size(); ++i) {
    const std::string p = "vq.encoder.conv" + std::to_string(i + 1) + ".";
    out.push_back(ParamSpec{p + "weight", {widths[i], in_ch, 4, 4, 4}, Init::kKaiming, true,
                            static_cast<long>(in_ch) * 64});
    out.push_back(ParamSpec{p + "bias", {widths[i]}, Init::kZeros, true, 0});
    in_ch = widths[i];
  }
  out.push_back(
      ParamSpec{"vq.codebook", {cfg.codebook_size, cfg.code_dim}, Init::kTruncNormal, true, 0});

  CnnDecoderConfig dec;
  dec.channels = cfg.decoder_channels;
  dec.upsample_stages = cfg.decoder_layers;
  std::vector<ParamSpec> head = cnn_param_specs(dec, cfg.code_dim, "vq.decoder.");
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<long> nearest_codes(const Tensor& z, const Tensor& codebook) {
  const long n = z.dim(0), d = z.dim(1), k = codebook.dim(0);
  if (codebook.dim(1) != d) throw std::invalid_argument("nearest_codes: width mismatch");
  std::vector<long> codes(static_cast<size_t>(n));
  for (long r = 0; r < n; ++r) {
    const double* row = z.data() + r * d;
    long best = 0;
    double best_d2 = 0.0;
    for (long j = 0; j < k; ++j) {
      const double* e = codebook.data() + j * d;
      double d2 = 0.0;
      for (long c = 0; c < d; ++c) {
        const double diff = row[c] - e[c];
        d2 += diff * diff;
      }
      if (j == 0 || d2 < best_d2) {  // strict: ties keep the lowest index
        best = j;
        best_d2 = d2;
      }
    }
    codes[static_cast<size_t>(r)] = best;
  }
  return codes;
}

VQVae::VQVae(VQConfig cfg, ParamStore params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  params_.check_matches(vqvae_param_specs(cfg_));
}

VQVae VQVae::create(const VQConfig& cfg, uint64_t seed) {
  cfg.validate();
  return VQVae(cfg, ParamStore::init(vqvae_param_specs(cfg), seed));
}

CnnDecoderConfig VQVae::decoder_geometry() const {
  CnnDecoderConfig dec;
  dec.channels = cfg_.decoder_channels;
  dec.upsample_stages = cfg_.decoder_layers;
  return dec;
}

ag::Var VQVae::encode_latent(const VoxelGrid& grid) const {
  if (grid.resolution() != cfg_.resolution) {
    throw std::invalid_argument("vq encoder expects resolution " +
                                std::to_string(cfg_.resolution) + ", got " +
                                std::to_string(grid.resolution()));
  }
  ag::Var x = ag::constant(grid_input(grid));
  for (int l = 1; l <= cfg_.encoder_layers; ++l) {
    const std::string p = "vq.encoder.conv" + std::to_string(l) + ".";
    x = ag::conv3d(x, params_.at(p + "weight"), params_.at(p + "bias"), 4, 2, 1);
    if (l < cfg_.encoder_layers) x = ag::relu(x);  // the code layer stays affine
  }
  // [code_dim, s, s, s] -> [s^3, code_dim] rows in cube linearization order.
  const long cells = cfg_.cells();
  const long d = cfg_.code_dim;
  std::vector<long> idx(static_cast<size_t>(cells * d));
  for (long r = 0; r < cells; ++r) {
    for (long c = 0; c < d; ++c) idx[static_cast<size_t>(r * d + c)] = c * cells + r;
  }
  return ag::reshape(ag::gather_flat(x, std::move(idx)), {cells, d});
}

QuantizeResult VQVae::quantize_rows(const ag::Var& z) const {
  const ag::Var& codebook = params_.at("vq.codebook");
  QuantizeResult out;
  out.codes = nearest_codes(z->value, codebook->value);
  ag::Var selected = ag::embedding(codebook, out.codes);
  // Straight-through: value follows the codebook rows, gradient passes to z
  // unchanged. The auxiliary terms train the codebook (toward sg(z)) and
  // commit the encoder (toward sg(e)).
  out.quantized = ag::add(z, ag::detach(ag::sub(selected, z)));
  const double inv = 1.0 / static_cast<double>(z->value.numel());
  out.codebook_loss = ag::scale(ag::sum_sq(ag::sub(ag::detach(z), selected)), inv);
  out.commitment_loss = ag::scale(ag::sum_sq(ag::sub(z, ag::detach(selected))), inv);
  return out;
}

std::vector<long> VQVae::encode_codes(const VoxelGrid& grid) const {
  ag::NoGradGuard guard;
  return nearest_codes(encode_latent(grid)->value, params_.at("vq.codebook")->value);
}

ag::Var VQVae::decode_codes_graph(const std::vector<long>& codes) const {
  check_codes(codes, cfg_.cells(), cfg_.codebook_size);
  ag::Var rows = ag::embedding(params_.at("vq.codebook"), codes);
  ag::Var cube = reshape_to_cube(rows, cfg_.latent_side());
  return cnn_decode(cube, decoder_geometry(), params_, "vq.decoder.");
}

VoxelField VQVae::decode_codes(const std::vector<long>& codes) const {
  ag::NoGradGuard guard;
  ag::Var out = decode_codes_graph(codes);
  return VoxelField(cfg_.resolution, out->value.vec());
}

VQVae::Stage1Terms VQVae::stage1_loss(const VoxelGrid& grid) const {
  ag::Var z = encode_latent(grid);
  QuantizeResult q = quantize_rows(z);
  ag::Var cube = reshape_to_cube(q.quantized, cfg_.latent_side());
  ag::Var recon = cnn_decode(cube, decoder_geometry(), params_, "vq.decoder.");

  Tensor targets({grid.num_cells()});
  for (long i = 0; i < targets.numel(); ++i) {
    targets[i] = static_cast<double>(grid.occupancy()[static_cast<size_t>(i)]);
  }
  ag::Var bce = ag::ce_loss(recon, targets);
  ag::Var aux = ag::add(q.codebook_loss, ag::scale(q.commitment_loss, cfg_.commitment_weight));

  Stage1Terms out;
  out.total = ag::add(bce, aux);
  out.recon = recon;
  out.codes = std::move(q.codes);
  return out;
}

double dead_code_fraction(const std::vector<long>& usage_counts) {
  if (usage_counts.empty()) return 0.0;
  const long dead = static_cast<long>(
      std::count(usage_counts.begin(), usage_counts.end(), 0L));
  return static_cast<double>(dead) / static_cast<double>(usage_counts.size());
}

std::vector<ParamSpec> code_prior_param_specs(const EncoderConfig& enc, const DecoderConfig& dec,
                                              const VQConfig& vq) {
  std::vector<ParamSpec> out = encoder_param_specs(enc);
  const int d = dec.dim;
  out.push_back(
      ParamSpec{"prior.token_embed", {vq.codebook_size + 1, d}, Init::kTruncNormal, true, 0});
  out.push_back(ParamSpec{"prior.pos_embed", {vq.cells(), d}, Init::kTruncNormal, true, 0});
  for (int l = 0; l < dec.layers; ++l) {
    std::vector<ParamSpec> block = decoder_block_specs("prior.layer" + std::to_string(l) + ".", d);
    out.insert(out.end(), block.begin(), block.end());
  }
  std::vector<ParamSpec> fin = norm_specs("prior.final_norm", d);
  out.insert(out.end(), fin.begin(), fin.end());
  out.push_back(ParamSpec{"prior.head.weight", {vq.codebook_size, d}, Init::kTruncNormal, true, 0});
  out.push_back(ParamSpec{"prior.head.bias", {vq.codebook_size}, Init::kZeros, true, 0});
  return out;
}

CodePriorModel::CodePriorModel(EncoderConfig enc, DecoderConfig dec, VQConfig vq,
                               ParamStore params)
    : enc_(enc), dec_(dec), vq_(std::move(vq)), params_(std::move(params)) {
  require(enc_.dim == dec_.dim, "code prior: encoder and decoder dims must match");
  require(dec_.dim % dec_.heads == 0, "code prior: dim not divisible by heads");
  vq_.validate();
  params_.check_matches(code_prior_param_specs(enc_, dec_, vq_));
}

CodePriorModel CodePriorModel::create(const EncoderConfig& enc, const DecoderConfig& dec,
                                      const VQConfig& vq, uint64_t seed) {
  return CodePriorModel(enc, dec, vq,
                        ParamStore::init(code_prior_param_specs(enc, dec, vq), seed));
}

ag::Var CodePriorModel::memory(const std::vector<Tensor>& views) const {
  std::vector<ag::Var> seqs;
  seqs.reserve(views.size());
  for (const Tensor& view : views) seqs.push_back(encode_view(view, enc_, params_));
  return pool_views(seqs);
}

ag::Var CodePriorModel::run_stack(const ag::Var& memory, const std::vector<long>& input_ids) const {
  std::vector<long> positions(input_ids.size());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<long>(i);
  ag::Var x = ag::add(ag::embedding(params_.at("prior.token_embed"), input_ids),
                      ag::embedding(params_.at("prior.pos_embed"), positions));
  for (int l = 0; l < dec_.layers; ++l) {
    x = decoder_block(params_, "prior.layer" + std::to_string(l) + ".", x, memory, dec_.heads,
                      /*causal_self=*/true);
  }
  x = layer_norm_named(params_, "prior.final_norm", x);
  return ag::linear(x, params_.at("prior.head.weight"), params_.at("prior.head.bias"));
}

ag::Var CodePriorModel::teacher_logits(const ag::Var& memory,
                                       const std::vector<long>& codes) const {
  check_codes(codes, vq_.cells(), vq_.codebook_size);
  // Shift right: the start token (index K) stands in front, the final code
  // is never fed back in.
  std::vector<long> input_ids;
  input_ids.reserve(codes.size());
  input_ids.push_back(vq_.codebook_size);
  input_ids.insert(input_ids.end(), codes.begin(), codes.end() - 1);
  return run_stack(memory, input_ids);
}

ag::Var CodePriorModel::teacher_loss(const ag::Var& memory, const std::vector<long>& codes) const {
  return ag::softmax_xent_mean(teacher_logits(memory, codes), codes);
}

std::vector<long> CodePriorModel::decode_codes_autoregressive(const ag::Var& memory) const {
  ag::NoGradGuard guard;
  std::vector<long> input_ids{static_cast<long>(vq_.codebook_size)};
  std::vector<long> codes;
  codes.reserve(static_cast<size_t>(vq_.cells()));
  for (int t = 0; t < vq_.cells(); ++t) {
    ag::Var out = run_stack(memory, input_ids);
    const Tensor& logits = out->value;
    const long k = logits.dim(1);
    const double* row = logits.data() + t * k;
    long best = 0;
    for (long j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;  // ties keep the lowest index
    }
    codes.push_back(best);
    input_ids.push_back(best);
  }
  return codes;
}

}  // namespace voxtr
