#include "voxtr/train/data_source.hpp"

#include <stdexcept>
#include <utility>

#include "voxtr/core/rng.hpp"
#include "voxtr/voxel/binvox.hpp"

namespace voxtr {

ManifestSource::ManifestSource(std::vector<SampleRecord> records, PreprocessConfig preprocess)
    : records_(std::move(records)), preprocess_(preprocess) {}

long ManifestSource::views_available(long index) const {
  return static_cast<long>(records_.at(static_cast<size_t>(index)).view_paths.size());
}

std::string ManifestSource::object_id(long index) const {
  return records_.at(static_cast<size_t>(index)).object_id;
}

std::string ManifestSource::category(long index) const {
  return records_.at(static_cast<size_t>(index)).category;
}

ResolvedSample ManifestSource::resolve(long index, long v, uint64_t seed) const {
  const SampleRecord& rec = records_.at(static_cast<size_t>(index));
  ViewSet views = sample_views(rec, v, seed, preprocess_);
  ResolvedSample out;
  out.views = std::move(views.images);
  out.target = read_binvox_file(rec.voxel_path);
  out.object_id = rec.object_id;
  out.category = rec.category;
  return out;
}

VoxelGrid ManifestSource::target(long index) const {
  return read_binvox_file(records_.at(static_cast<size_t>(index)).voxel_path);
}

long ToySource::views_available(long index) const {
  return static_cast<long>(samples_.at(static_cast<size_t>(index)).views.images.size());
}

std::string ToySource::object_id(long index) const {
  return samples_.at(static_cast<size_t>(index)).views.object_id;
}

std::string ToySource::category(long index) const {
  return samples_.at(static_cast<size_t>(index)).views.category;
}

ResolvedSample ToySource::resolve(long index, long v, uint64_t seed) const {
  const ToySample& s = samples_.at(static_cast<size_t>(index));
  const long available = static_cast<long>(s.views.images.size());
  if (v < 1 || v > available) {
    throw std::invalid_argument("requested " + std::to_string(v) + " views, object " +
                                s.views.object_id + " has " + std::to_string(available));
  }
  // Same keying as the manifest path: the subset depends only on
  // (seed, object id), never on iteration order.
  Rng rng(mix_seed(seed, hash_string(s.views.object_id)));
  std::vector<long> picks = rng.sample_without_replacement(available, v);
  ResolvedSample out;
  out.views.reserve(static_cast<size_t>(v));
  for (long p : picks) out.views.push_back(s.views.images[static_cast<size_t>(p)]);
  out.target = s.voxel;
  out.object_id = s.views.object_id;
  out.category = s.views.category;
  return out;
}

VoxelGrid ToySource::target(long index) const {
  return samples_.at(static_cast<size_t>(index)).voxel;
}

}  // namespace voxtr
