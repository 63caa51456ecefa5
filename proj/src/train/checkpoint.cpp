#include "voxtr/train/checkpoint.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "voxtr/core/autodiff.hpp"
#include "voxtr/core/errors.hpp"

namespace voxtr {

void save_checkpoint(const std::string& path, const nlohmann::json& config, long step,
                     const ParamStore& params, const AdamW* optimizer) {
  TensorArchive archive;
  for (const auto& [name, var] : params.all()) archive.put("param." + name, var->value);
  if (optimizer != nullptr) optimizer->save_state(archive);
  const std::string cfg_text = config.dump();
  archive.put_bytes("meta.config", std::vector<uint8_t>(cfg_text.begin(), cfg_text.end()));
  archive.put_i64("meta.step", {static_cast<int64_t>(step)}, {1});
  archive.save(path);
}

CheckpointData load_checkpoint(const std::string& path) {
  CheckpointData out;
  out.archive = TensorArchive::load(path);
  if (!out.archive.contains("meta.config") || !out.archive.contains("meta.step")) {
    throw IoError("not a checkpoint (missing meta entries): " + path);
  }
  const std::vector<uint8_t> cfg = out.archive.get_bytes("meta.config");
  out.config = nlohmann::json::parse(std::string(cfg.begin(), cfg.end()));
  out.step = static_cast<long>(out.archive.get_i64("meta.step")[0]);
  return out;
}

ParamStore CheckpointData::load_params(const std::vector<ParamSpec>& specs) const {
  ParamStore store;
  for (const ParamSpec& spec : specs) {
    const std::string key = "param." + spec.name;
    if (!archive.contains(key)) throw ConfigError("checkpoint missing parameter '" + spec.name + "'");
    Tensor t = archive.get(key);
    if (t.shape() != spec.shape) {
      throw ConfigError("checkpoint parameter '" + spec.name + "' has shape " +
                        shape_str(t.shape()) + ", expected " + shape_str(spec.shape));
    }
    store.insert(spec.name, ag::leaf(std::move(t), spec.trainable));
  }
  store.check_matches(specs);
  return store;
}

void CheckpointData::load_optimizer(AdamW& optimizer) const {
  optimizer.load_state(archive);
}

}  // namespace voxtr
