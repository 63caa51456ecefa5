#include "voxtr/model/model.hpp"

#include <utility>

namespace voxtr {

VoxtrModel::VoxtrModel(ModelConfig cfg, ParamStore params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  params_.check_matches(model_param_specs(cfg_));
}

VoxtrModel VoxtrModel::create(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  return VoxtrModel(cfg, ParamStore::init(model_param_specs(cfg), seed));
}

ag::Var VoxtrModel::forward(const std::vector<Tensor>& views) const {
  std::vector<ag::Var> seqs;
  seqs.reserve(views.size());
  for (const Tensor& view : views) seqs.push_back(encode_view(view, cfg_.encoder, params_));
  ag::Var memory = pool_views(seqs);
  ag::Var queries = decode_queries(memory, cfg_.decoder, params_);
  if (cfg_.head == VoxelHead::kCnn) {
    return cnn_decode(reshape_to_cube(queries, cfg_.decoder.query_side), cfg_.cnn, params_);
  }
  return mlp_decode(queries, params_, cfg_.resolution, cfg_.decoder.query_side);
}

VoxelField VoxtrModel::predict(const std::vector<Tensor>& views) const {
  ag::NoGradGuard guard;
  ag::Var out = forward(views);
  return VoxelField(cfg_.resolution, out->value.vec());
}

}  // namespace voxtr
