#ifndef VOXTR_TRAIN_DATA_SOURCE_HPP_
#define VOXTR_TRAIN_DATA_SOURCE_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voxtr/core/tensor.hpp"
#include "voxtr/data/dataset.hpp"
#include "voxtr/data/image.hpp"
#include "voxtr/data/manifest.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

// One training/eval example resolved to tensors.
struct ResolvedSample {
  std::vector<Tensor> views;  // each [3, S, S]
  VoxelGrid target;
  std::string object_id;
  std::string category;
};

// What the training loop and the evaluator draw from. Implementations must
// make resolve()'s view choice a pure function of (seed, object id) so a
// fixed seed yields stable view subsets regardless of iteration order.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual long size() const = 0;
  virtual long views_available(long index) const = 0;
  virtual std::string object_id(long index) const = 0;
  virtual std::string category(long index) const = 0;
  // Draw `v` views without replacement; v > views_available throws
  // std::invalid_argument.
  virtual ResolvedSample resolve(long index, long v, uint64_t seed) const = 0;
  // Ground-truth grid alone, without touching the renders (the VQ stage-1
  // trainer consumes only voxels).
  virtual VoxelGrid target(long index) const = 0;
};

// Disk-backed manifest records (renders + binvox per object).
class ManifestSource : public SampleSource {
 public:
  ManifestSource(std::vector<SampleRecord> records, PreprocessConfig preprocess);

  long size() const override { return static_cast<long>(records_.size()); }
  long views_available(long index) const override;
  std::string object_id(long index) const override;
  std::string category(long index) const override;
  ResolvedSample resolve(long index, long v, uint64_t seed) const override;
  VoxelGrid target(long index) const override;

 private:
  std::vector<SampleRecord> records_;
  PreprocessConfig preprocess_;
};

// In-memory procedural toy samples (already preprocessed).
class ToySource : public SampleSource {
 public:
  explicit ToySource(std::vector<ToySample> samples) : samples_(std::move(samples)) {}

  long size() const override { return static_cast<long>(samples_.size()); }
  long views_available(long index) const override;
  std::string object_id(long index) const override;
  std::string category(long index) const override;
  ResolvedSample resolve(long index, long v, uint64_t seed) const override;
  VoxelGrid target(long index) const override;

  const std::vector<ToySample>& samples() const { return samples_; }

 private:
  std::vector<ToySample> samples_;
};

}  // namespace voxtr

#endif  // VOXTR_TRAIN_DATA_SOURCE_HPP_
