#ifndef VOXTR_MODEL_MODEL_HPP_
#define VOXTR_MODEL_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "voxtr/model/config.hpp"
#include "voxtr/model/decoder3d.hpp"
#include "voxtr/model/params.hpp"
#include "voxtr/model/vit.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

// Single-view / multi-view voxel reconstructor: per-view image encoder,
// mean pooling over views, parallel query decoder, voxel head.
class VoxtrModel {
 public:
  // Validates the config and checks the store against its parameter specs.
  VoxtrModel(ModelConfig cfg, ParamStore params);

  // Fresh deterministic initialization from the config's specs.
  static VoxtrModel create(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Builds the full differentiable graph over 1+ preprocessed [3, S, S]
  // views and returns the [R, R, R] occupancy-probability tensor.
  ag::Var forward(const std::vector<Tensor>& views) const;

  // Value-only forward (no graph construction).
  VoxelField predict(const std::vector<Tensor>& views) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace voxtr

#endif  // VOXTR_MODEL_MODEL_HPP_
