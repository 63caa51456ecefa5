#ifndef VOXTR_TRAIN_CHECKPOINT_HPP_
#define VOXTR_TRAIN_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "voxtr/core/archive.hpp"
#include "voxtr/model/params.hpp"
#include "voxtr/train/adamw.hpp"

namespace voxtr {

// One self-contained training snapshot in a tensor archive:
//   param.<name>   every parameter and buffer, f64
//   opt.m/<...>    optimizer moments (present when saved with an optimizer)
//   opt.step       update counter
//   meta.config    the full resolved config as JSON bytes
//   meta.step      training step counter
// The archive layer writes via temp file + atomic rename, so a crash never
// leaves a half-written checkpoint behind.
void save_checkpoint(const std::string& path, const nlohmann::json& config, long step,
                     const ParamStore& params, const AdamW* optimizer = nullptr);

struct CheckpointData {
  nlohmann::json config;
  long step = 0;
  TensorArchive archive;

  // Rebuilds a parameter store against `specs`: every spec name must be
  // present with the right shape (ConfigError otherwise); trainability
  // comes from the specs.
  ParamStore load_params(const std::vector<ParamSpec>& specs) const;

  // Restores moments and step counter saved alongside the parameters.
  void load_optimizer(AdamW& optimizer) const;
};

CheckpointData load_checkpoint(const std::string& path);  // IoError if unreadable

}  // namespace voxtr

#endif  // VOXTR_TRAIN_CHECKPOINT_HPP_
