#include "voxtr/voxel/voxel_grid.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>
#include <string>

namespace voxtr {

VoxelGrid::VoxelGrid(long resolution) : resolution_(resolution) {
  if (resolution <= 0) throw std::invalid_argument("voxel grid resolution must be positive");
  occupancy_.assign(static_cast<size_t>(num_cells()), 0);
}

long VoxelGrid::count_occupied() const {
  long n = 0;
  for (uint8_t v : occupancy_) n += v;
  return n;
}

VoxelField::VoxelField(long resolution) : resolution_(resolution) {
  if (resolution <= 0) throw std::invalid_argument("voxel field resolution must be positive");
  values_.assign(static_cast<size_t>(num_cells()), 0.0);
}

VoxelField::VoxelField(long resolution, std::vector<double> values) : VoxelField(resolution) {
  if (static_cast<long>(values.size()) != num_cells()) {
    throw std::invalid_argument("voxel field needs resolution^3 values, got " +
                                std::to_string(values.size()));
  }
  values_ = std::move(values);
}

VoxelGrid threshold(const VoxelField& field, double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1), got " + std::to_string(t));
  }
  VoxelGrid grid(field.resolution());
  const auto& v = field.values();
  auto& occ = grid.occupancy();
  for (size_t i = 0; i < v.size(); ++i) occ[i] = v[i] > t ? 1 : 0;
  return grid;
}

double iou(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.resolution() != b.resolution()) {
    throw std::invalid_argument("iou needs equal resolutions, got " +
                                std::to_string(a.resolution()) + " and " +
                                std::to_string(b.resolution()));
  }
  const uint8_t* pa = a.occupancy().data();
  const uint8_t* pb = b.occupancy().data();
  const size_t n = a.occupancy().size();
  long inter = 0, uni = 0;
  // Cells are 0/1 bytes, so eight at a time popcount of AND/OR words counts
  // exactly the intersecting / covered cells.
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    uint64_t wa, wb;
    std::memcpy(&wa, pa + i, 8);
    std::memcpy(&wb, pb + i, 8);
    inter += std::popcount(wa & wb);
    uni += std::popcount(wa | wb);
  }
  for (; i < n; ++i) {
    inter += pa[i] & pb[i];
    uni += pa[i] | pb[i];
  }
  if (uni == 0) return 1.0;  // both empty: perfect agreement
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace voxtr
