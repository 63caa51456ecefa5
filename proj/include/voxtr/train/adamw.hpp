#ifndef VOXTR_TRAIN_ADAMW_HPP_
#define VOXTR_TRAIN_ADAMW_HPP_

#include <map>
#include <string>

#include "voxtr/core/archive.hpp"
#include "voxtr/core/tensor.hpp"
#include "voxtr/model/params.hpp"

namespace voxtr {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-2;
  double epsilon = 1e-8;
};

// Adam with decoupled weight decay. The decay term is scaled by the
// learning rate, so learning_rate = 0 leaves parameters bit-identical.
// Moment buffers are keyed by parameter name and created lazily, which
// keeps the optimizer usable across stores that share a naming scheme.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return step_; }

  // One update over every trainable parameter in the store, in name order.
  // Parameters without an accumulated gradient this step contribute zeros
  // to their moments. `lr_override` < 0 means use the configured rate.
  void step(ParamStore& params, double lr_override = -1.0);

  // Serializes moments and the step counter under "opt." archive keys.
  void save_state(TensorArchive& archive) const;
  void load_state(const TensorArchive& archive);

 private:
  AdamWConfig cfg_;
  long step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace voxtr

#endif  // VOXTR_TRAIN_ADAMW_HPP_
