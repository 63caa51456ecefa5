#ifndef VOXTR_MODEL_VQVAE_HPP_
#define VOXTR_MODEL_VQVAE_HPP_

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "voxtr/core/ops.hpp"
#include "voxtr/model/config.hpp"
#include "voxtr/model/params.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

// Two-stage discrete variant: stage 1 is a vector-quantized voxel
// autoencoder (occupancy -> 64 codebook indices -> occupancy field);
// stage 2 is a causal transformer that predicts the code sequence from
// pooled image features and feeds a frozen stage-1 decoder.

struct VQConfig {
  int codebook_size = 2048;
  int code_dim = 512;
  int encoder_layers = 3;  // stride-2 convolutions, 32^3 -> 4^3
  int decoder_layers = 3;  // transposed-conv stages, 4^3 -> 32^3
  double commitment_weight = 0.25;
  // Channel widths of the encoder layers before the final code_dim layer;
  // the reference sizes are unstated upstream, chosen as 64 -> 128 -> 512.
  std::vector<int> encoder_channels = {64, 128};
  int decoder_channels = 64;  // width of the transposed-conv decoder
  int resolution = 32;

  int latent_side() const { return resolution >> encoder_layers; }
  int cells() const { return latent_side() * latent_side() * latent_side(); }

  void validate() const;  // ConfigError on bad geometry
  static VQConfig toy();  // desk-scale: K=32, 32-dim codes, narrow convs
};

void to_json(nlohmann::json& j, const VQConfig& c);
void from_json(const nlohmann::json& j, VQConfig& c);

std::vector<ParamSpec> vqvae_param_specs(const VQConfig& cfg);

// Nearest codebook row per z row (Euclidean), ties resolved toward the
// lowest index. This is the quantizer's index contract, shared by training
// and the exhaustive-oracle test.
std::vector<long> nearest_codes(const Tensor& z, const Tensor& codebook);

struct QuantizeResult {
  std::vector<long> codes;
  ag::Var quantized;        // selected rows; gradient passes straight through to z
  ag::Var codebook_loss;    // mean squared pull of selected rows toward sg(z)
  ag::Var commitment_loss;  // mean squared pull of z toward sg(selected rows)
};

class VQVae {
 public:
  VQVae(VQConfig cfg, ParamStore params);
  static VQVae create(const VQConfig& cfg, uint64_t seed);

  const VQConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  CnnDecoderConfig decoder_geometry() const;

  // Convolutional stack to the pre-quantization rows, [cells, code_dim];
  // row r belongs to latent cell (r / s^2, (r / s) % s, r % s).
  // Wrong grid resolution throws std::invalid_argument.
  ag::Var encode_latent(const VoxelGrid& grid) const;

  QuantizeResult quantize_rows(const ag::Var& z) const;

  // Grid -> code sequence of length cells() (value-only).
  std::vector<long> encode_codes(const VoxelGrid& grid) const;

  // Codebook lookup + transposed-conv decoder; keeps the graph for training.
  // Codes out of [0, K) throw std::invalid_argument.
  ag::Var decode_codes_graph(const std::vector<long>& codes) const;

  // Value-only decode to a probability field.
  VoxelField decode_codes(const std::vector<long>& codes) const;

  // Voxelwise binary cross-entropy reconstruction plus the codebook term
  // and commitment_weight times the commitment term.
  struct Stage1Terms {
    ag::Var total;
    ag::Var recon;  // [R, R, R] probabilities
    std::vector<long> codes;
  };
  Stage1Terms stage1_loss(const VoxelGrid& grid) const;

 private:
  VQConfig cfg_;
  ParamStore params_;
};

// Fraction of codebook entries never selected, given per-code usage counts.
double dead_code_fraction(const std::vector<long>& usage_counts);

// Stage 2: pooled image features in, code sequence out. Owns the image
// encoder and the causal code transformer in one parameter store; the
// stage-1 decoder stays frozen outside this model.
class CodePriorModel {
 public:
  CodePriorModel(EncoderConfig enc, DecoderConfig dec, VQConfig vq, ParamStore params);
  static CodePriorModel create(const EncoderConfig& enc, const DecoderConfig& dec,
                               const VQConfig& vq, uint64_t seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EncoderConfig& encoder_config() const { return enc_; }
  const DecoderConfig& decoder_config() const { return dec_; }
  const VQConfig& vq_config() const { return vq_; }

  // Per-view encode + order-invariant mean pool.
  ag::Var memory(const std::vector<Tensor>& views) const;

  // Teacher-forced next-code logits, [cells, K]: row t sees the start token
  // and codes[0..t-1]. Code count must equal cells().
  ag::Var teacher_logits(const ag::Var& memory, const std::vector<long>& codes) const;

  // Mean cross-entropy of teacher_logits against the same codes.
  ag::Var teacher_loss(const ag::Var& memory, const std::vector<long>& codes) const;

  // Greedy autoregressive emission of exactly cells() codes (value-only).
  std::vector<long> decode_codes_autoregressive(const ag::Var& memory) const;

 private:
  ag::Var run_stack(const ag::Var& memory, const std::vector<long>& input_ids) const;

  EncoderConfig enc_;
  DecoderConfig dec_;
  VQConfig vq_;
  ParamStore params_;
};

std::vector<ParamSpec> code_prior_param_specs(const EncoderConfig& enc, const DecoderConfig& dec,
                                              const VQConfig& vq);

}  // namespace voxtr

#endif  // VOXTR_MODEL_VQVAE_HPP_
