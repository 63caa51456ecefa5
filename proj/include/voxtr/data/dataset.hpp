#ifndef VOXTR_DATA_DATASET_HPP_
#define VOXTR_DATA_DATASET_HPP_

#include <string>
#include <vector>

#include "voxtr/core/tensor.hpp"
#include "voxtr/data/image.hpp"
#include "voxtr/data/manifest.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

// V preprocessed views of one object, each [3, S, S].
struct ViewSet {
  std::vector<Tensor> images;
  std::string object_id;
  std::string category;
};

// Draws V of the record's views without replacement and preprocesses them.
// The draw is a pure function of (seed, object_id), so a fixed seed gives
// every object its own stable view subset regardless of iteration order.
// V > available views throws std::invalid_argument.
ViewSet sample_views(const SampleRecord& record, long v, uint64_t seed,
                     const PreprocessConfig& cfg = {});

struct ToySample {
  ViewSet views;
  VoxelGrid voxel;
};

// Orthographic depth-shaded silhouette of a grid, rendered at 2N x 2N.
// Views 0..5 look along +x, -x, +y, -y, +z, -z; views 6 and 7 are diagonal
// shear projections along (1,1,0) and (1,-1,0). Background is white;
// foreground intensity encodes first-hit depth, so the foreground mask is
// exactly the max-projection of the occupancy along the view axis.
Image render_toy_view(const VoxelGrid& grid, int view_index);

// Procedural cuboids / spheres / L-shapes with `views` renders each
// (4 axis views by default; up to 8 adds the remaining axes and the two
// diagonals). Deterministic under seed; every grid is non-empty, non-full.
// Images are preprocessed at target_size 2 * resolution.
std::vector<ToySample> make_toy_dataset(long n, uint64_t seed, long resolution = 32,
                                        int views = 4);

// Writes make_toy_dataset output as an on-disk manifest tree:
// dir/<toy_category>/<object_id>/rendering/NN.png + model.binvox, with
// splits/{train,val,test}.txt all listing every object.
void write_toy_dataset(const std::string& dir, long n, uint64_t seed, long resolution = 32,
                       int views = 4);

}  // namespace voxtr

#endif  // VOXTR_DATA_DATASET_HPP_
