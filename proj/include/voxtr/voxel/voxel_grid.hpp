#ifndef VOXTR_VOXEL_VOXEL_GRID_HPP_
#define VOXTR_VOXEL_VOXEL_GRID_HPP_

#include <array>
#include <cstdint>
#include <vector>

namespace voxtr {

// Binary occupancy cube at resolution N. Cells are indexed (x, y, z) with z
// running fastest in memory; translate/scale carry voxelizer metadata.
class VoxelGrid {
 public:
  VoxelGrid() : VoxelGrid(32) {}
  explicit VoxelGrid(long resolution);

  long resolution() const { return resolution_; }
  long num_cells() const { return resolution_ * resolution_ * resolution_; }

  long index(long x, long y, long z) const { return (x * resolution_ + y) * resolution_ + z; }
  uint8_t get(long x, long y, long z) const { return occupancy_[static_cast<size_t>(index(x, y, z))]; }
  void set(long x, long y, long z, bool on) { occupancy_[static_cast<size_t>(index(x, y, z))] = on ? 1 : 0; }

  std::vector<uint8_t>& occupancy() { return occupancy_; }
  const std::vector<uint8_t>& occupancy() const { return occupancy_; }

  long count_occupied() const;

  std::array<double, 3> translate{0.0, 0.0, 0.0};
  double scale = 1.0;

 private:
  long resolution_;
  std::vector<uint8_t> occupancy_;
};

// Per-cell occupancy probabilities in [0, 1], same (x, y, z) layout.
class VoxelField {
 public:
  explicit VoxelField(long resolution);
  VoxelField(long resolution, std::vector<double> values);

  long resolution() const { return resolution_; }
  long num_cells() const { return resolution_ * resolution_ * resolution_; }
  long index(long x, long y, long z) const { return (x * resolution_ + y) * resolution_ + z; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  long resolution_;
  std::vector<double> values_;
};

// occupancy[i] = 1 iff values[i] > t; throws std::invalid_argument unless
// t lies strictly inside (0, 1).
VoxelGrid threshold(const VoxelField& field, double t);

// |a AND b| / |a OR b|. Two empty grids agree perfectly: 1.0. Throws
// std::invalid_argument on mismatched resolutions.
double iou(const VoxelGrid& a, const VoxelGrid& b);

}  // namespace voxtr

#endif  // VOXTR_VOXEL_VOXEL_GRID_HPP_
