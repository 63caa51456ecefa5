#include "voxtr/train/predict.hpp"

#include <stdexcept>

#include "voxtr/core/archive.hpp"
#include "voxtr/data/image.hpp"
#include "voxtr/voxel/binvox.hpp"

namespace voxtr {

VoxelGrid predict_to_file(const VoxtrModel& model, const PredictRequest& request) {
  const size_t n = request.image_paths.size();
  if (n < 1 || n > 20) {
    throw std::invalid_argument("predict takes 1 to 20 images, got " + std::to_string(n));
  }

  PreprocessConfig pre;
  pre.target_size = model.config().encoder.image_size();
  std::vector<Tensor> views;
  views.reserve(n);
  for (const std::string& path : request.image_paths) {
    views.push_back(preprocess_image(read_png(path), pre));
  }

  VoxelField field = model.predict(views);
  VoxelGrid grid = threshold(field, request.threshold);
  write_binvox_file(grid, request.out_path);

  if (!request.probabilities_path.empty()) {
    TensorArchive sidecar;
    const long r = field.resolution();
    sidecar.put("probabilities", Tensor({r, r, r}, field.values()));
    sidecar.save(request.probabilities_path);
  }
  return grid;
}

}  // namespace voxtr
