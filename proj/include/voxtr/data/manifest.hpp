#ifndef VOXTR_DATA_MANIFEST_HPP_
#define VOXTR_DATA_MANIFEST_HPP_

#include <string>
#include <vector>

namespace voxtr {

// One reconstruction sample: a set of rendered views plus the ground-truth
// voxel grid on disk.
struct SampleRecord {
  std::string object_id;
  std::string category;
  std::vector<std::string> view_paths;  // ordered; ShapeNet ships 24 per object
  std::string voxel_path;
};

// Layout: root/<category>/<object_id>/rendering/*.png and
// root/<category>/<object_id>/model.binvox, with split membership listed in
// root/splits/<split>.txt as "category/object_id" lines. Records come back
// sorted by (category, object_id). A listed object with no renders or no
// voxel file raises ManifestError naming it.
std::vector<SampleRecord> load_shapenet_manifest(const std::string& root, const std::string& split);

// Reads root/pix3d.json and keeps the untruncated, unoccluded chairs; each
// record carries exactly one view. Sorted by object_id.
std::vector<SampleRecord> load_pix3d_manifest(const std::string& root);

}  // namespace voxtr

#endif  // VOXTR_DATA_MANIFEST_HPP_
