#ifndef VOXTR_TRAIN_PREDICT_HPP_
#define VOXTR_TRAIN_PREDICT_HPP_

#include <string>
#include <vector>

#include "voxtr/model/model.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

struct PredictRequest {
  std::vector<std::string> image_paths;  // 1..20 views of one object
  double threshold = 0.5;
  std::string out_path;            // binvox destination
  std::string probabilities_path;  // optional raw-field sidecar archive ("" = skip)
};

// Reads and preprocesses the images at the model's input size, runs one
// forward pass, thresholds, and writes the binvox file (plus the sidecar
// when requested, under the archive key "probabilities"). Returns the
// thresholded grid. Out-of-range image counts throw std::invalid_argument;
// unreadable images surface as IoError naming the path.
VoxelGrid predict_to_file(const VoxtrModel& model, const PredictRequest& request);

}  // namespace voxtr

#endif  // VOXTR_TRAIN_PREDICT_HPP_
