#ifndef VOXTR_TRAIN_ABLATION_HPP_
#define VOXTR_TRAIN_ABLATION_HPP_

#include <string>

#include "voxtr/model/vqvae.hpp"
#include "voxtr/train/evaluate.hpp"
#include "voxtr/train/trainer.hpp"

namespace voxtr {

// The six ablation setups:
//   1  tiny decoder: 1 layer, 1 head
//   2  no pretrained encoder weights
//   3  ResNet-50 backbone in place of the patch transformer
//   4  two-stage vector-quantized variant
//   5  voxelwise cross-entropy training loss
//   6  one-layer MLP voxel head
std::string ablation_label(int setup);  // ConfigError outside 1..6

// Config delta for the model side; setups 4 and 5 leave it unchanged.
ModelConfig ablation_model_config(int setup, const ModelConfig& base);

// Config delta for the training side; only setup 5 changes anything (the
// loss kind).
TrainConfig ablation_train_config(int setup, const TrainConfig& base);

struct AblationOutcome {
  int setup = 0;
  std::string label;
  TrainResult training;           // setup 4: the stage-2 run
  EvalReport report;
  // Setup 4 extras; negative for the other setups.
  double stage1_iou = -1.0;            // reconstruction IoU of the frozen autoencoder
  double stage2_token_accuracy = -1.0;  // teacher-forced, after training
};

// Materializes the delta, trains from scratch, evaluates, and returns a
// labeled row. Setup 4 trains both stages (autoencoder on grids, then the
// code prior on images against frozen codes) and evaluates end to end:
// images -> greedy codes -> frozen decoder -> IoU.
AblationOutcome run_ablation(int setup, const SampleSource& train_data,
                             const SampleSource& eval_data, const ModelConfig& base_model,
                             const TrainConfig& base_train, const VQConfig& vq,
                             const std::string& out_dir);

}  // namespace voxtr

#endif  // VOXTR_TRAIN_ABLATION_HPP_
