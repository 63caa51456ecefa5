#ifndef VOXTR_VOXEL_BINVOX_HPP_
#define VOXTR_VOXEL_BINVOX_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

// Binvox v1 codec. ASCII header ("#binvox 1", "dim N N N",
// "translate tx ty tz", "scale s", "data") followed by binary
// (value, count) byte pairs. In the file, y runs fastest, then z, then x;
// VoxelGrid stores z fastest, so the codec permutes.
//
// read_binvox throws BinvoxFormatError on a malformed header (the message
// quotes the offending line) and BinvoxTruncationError when the RLE payload
// expands to anything other than resolution^3 cells.
VoxelGrid read_binvox(const std::vector<uint8_t>& bytes);

// Canonical encoding: maximal runs, split at the one-byte cap of 255.
// read_binvox inverts it exactly, including translate/scale metadata.
std::vector<uint8_t> write_binvox(const VoxelGrid& grid);

VoxelGrid read_binvox_file(const std::string& path);
void write_binvox_file(const VoxelGrid& grid, const std::string& path);

}  // namespace voxtr

#endif  // VOXTR_VOXEL_BINVOX_HPP_
