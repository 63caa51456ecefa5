#ifndef VOXTR_MODEL_PARAMS_HPP_
#define VOXTR_MODEL_PARAMS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "voxtr/core/autodiff.hpp"
#include "voxtr/model/config.hpp"

namespace voxtr {

enum class Init {
  kZeros,
  kOnes,
  kTruncNormal,  // std 0.02, redrawn beyond two sigma
  kKaiming,      // normal with std sqrt(2 / fan_in)
};

// Declared name/shape/init of one tensor. Specs describe a model's full
// parameter set without allocating it, which is how count_params stays
// cheap for the 163M-parameter configuration.
struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::kZeros;
  bool trainable = true;
  long fan_in = 0;  // kKaiming only
};

std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& cfg);
std::vector<ParamSpec> decoder_param_specs(const DecoderConfig& cfg);
// One pre-norm decoder block (self-attention, cross-attention, feed-forward)
// under `prefix`, e.g. "decoder.layer0.".
std::vector<ParamSpec> decoder_block_specs(const std::string& prefix, int dim);
// A layer-norm gamma/beta pair under `prefix`, e.g. "decoder.final_norm".
std::vector<ParamSpec> norm_specs(const std::string& prefix, int dim);
// in_dim is the channel width of the incoming feature cube.
std::vector<ParamSpec> cnn_param_specs(const CnnDecoderConfig& cfg, int in_dim,
                                       const std::string& prefix = "cnn.");
std::vector<ParamSpec> mlp_param_specs(int dim, int sub_block_cells);
std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg);

// Sum of trainable element counts.
long count_params(const std::vector<ParamSpec>& specs);
long count_params(const ModelConfig& cfg);
long count_encoder_params(const EncoderConfig& cfg);

// Named parameter tensors, sorted by name. Trainable entries are autodiff
// leaves; frozen statistics (ResNet batch-norm buffers) are stored alongside
// with requires_grad off so checkpoints capture everything.
class ParamStore {
 public:
  // Every tensor drawn from its own stream keyed by (seed, name), so the
  // realized values do not depend on spec order.
  static ParamStore init(const std::vector<ParamSpec>& specs, uint64_t seed);

  const ag::Var& at(const std::string& name) const;  // ConfigError if missing
  bool contains(const std::string& name) const;
  void insert(const std::string& name, ag::Var var);  // ConfigError on duplicate

  std::map<std::string, ag::Var>& all() { return vars_; }
  const std::map<std::string, ag::Var>& all() const { return vars_; }
  size_t size() const { return vars_.size(); }

  long trainable_count() const;
  void zero_grads() const;

  // Exact two-way match of names and shapes; ConfigError names the first
  // offender. Trainability must agree as well.
  void check_matches(const std::vector<ParamSpec>& specs) const;

 private:
  std::map<std::string, ag::Var> vars_;
};

}  // namespace voxtr

#endif  // VOXTR_MODEL_PARAMS_HPP_
