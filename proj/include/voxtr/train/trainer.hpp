#ifndef VOXTR_TRAIN_TRAINER_HPP_
#define VOXTR_TRAIN_TRAINER_HPP_

#include <cstdint>
#include <string>

#include <json.hpp>

#include "voxtr/loss/losses.hpp"
#include "voxtr/model/model.hpp"
#include "voxtr/model/vqvae.hpp"
#include "voxtr/train/data_source.hpp"

namespace voxtr {

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-2;
  long batch_size = 16;
  long max_steps = 500;
  long views_per_sample = 1;  // V_train
  bool mixed_precision = false;
  uint64_t seed = 0;
  LossConfig loss;
  // Off by default; when on, the rate follows a half-cosine from
  // learning_rate to zero over max_steps.
  bool cosine_schedule = false;
  long log_every = 1;        // metrics cadence in steps
  long checkpoint_every = 0;  // 0 = final checkpoint only

  void validate() const;  // ConfigError on out-of-range fields
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

struct TrainResult {
  long steps = 0;
  double final_loss = 0.0;
  double final_train_iou = 0.0;  // of the last logged batch
  std::string checkpoint_path;   // final checkpoint
  std::string metrics_path;
};

// Standard loop: deterministic epoch shuffle, V_train views per object,
// batch-mean loss, AdamW update; metrics appended to out_dir/metrics.ndjson
// and checkpoints written under out_dir. A non-finite loss aborts with the
// step and the offending batch's object ids. Fully deterministic under the
// config seed (the mixed_precision flag is recorded but this backend always
// computes in double precision).
TrainResult train_model(VoxtrModel& model, const SampleSource& data, const TrainConfig& cfg,
                        const std::string& out_dir);

// Stage 1 of the two-stage variant: the vector-quantized autoencoder fits
// the ground-truth grids alone (no images). Metrics use the reconstruction
// IoU at threshold 0.5. Appends a dead-code fraction line to the log each
// epoch via the returned result only (single scalar stream keeps the
// metrics schema uniform).
TrainResult train_vqvae(VQVae& vae, const SampleSource& data, const TrainConfig& cfg,
                        const std::string& out_dir);

// Stage 2: the code prior fits teacher-forced code sequences produced by a
// frozen stage-1 model. The iou field of each metrics record carries the
// teacher-forced per-token accuracy of the batch (the stage's natural
// quality scalar).
TrainResult train_code_prior(CodePriorModel& prior, const VQVae& frozen_vae,
                             const SampleSource& data, const TrainConfig& cfg,
                             const std::string& out_dir);

}  // namespace voxtr

#endif  // VOXTR_TRAIN_TRAINER_HPP_
