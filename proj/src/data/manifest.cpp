#include "voxtr/data/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "voxtr/core/errors.hpp"

namespace voxtr {

namespace fs = std::filesystem;

std::vector<SampleRecord> load_shapenet_manifest(const std::string& root, const std::string& split) {
  if (split != "train" && split != "val" && split != "test") {
    throw std::invalid_argument("unknown split \"" + split + "\" (want train/val/test)");
  }
  const fs::path split_path = fs::path(root) / "splits" / (split + ".txt");
  std::ifstream in(split_path);
  if (!in) throw ManifestError("cannot open split file " + split_path.string());

  std::vector<SampleRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t slash = line.find('/');
    if (slash == std::string::npos) {
      throw ManifestError("bad split line \"" + line + "\" (want category/object_id)");
    }
    SampleRecord rec;
    rec.category = line.substr(0, slash);
    rec.object_id = line.substr(slash + 1);

    const fs::path obj_dir = fs::path(root) / rec.category / rec.object_id;
    const fs::path render_dir = obj_dir / "rendering";
    if (fs::is_directory(render_dir)) {
      for (const auto& entry : fs::directory_iterator(render_dir)) {
        if (entry.path().extension() == ".png") rec.view_paths.push_back(entry.path().string());
      }
    }
    std::sort(rec.view_paths.begin(), rec.view_paths.end());
    if (rec.view_paths.empty()) {
      throw ManifestError("object " + line + " has no rendered views under " + render_dir.string());
    }
    const fs::path voxel = obj_dir / "model.binvox";
    if (!fs::is_regular_file(voxel)) {
      throw ManifestError("object " + line + " is missing voxel file " + voxel.string());
    }
    rec.voxel_path = voxel.string();
    records.push_back(std::move(rec));
  }

  std::sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.category, a.object_id) < std::tie(b.category, b.object_id);
  });
  return records;
}

std::vector<SampleRecord> load_pix3d_manifest(const std::string& root) {
  const fs::path anno_path = fs::path(root) / "pix3d.json";
  std::ifstream in(anno_path);
  if (!in) throw ManifestError("cannot open annotation file " + anno_path.string());

  nlohmann::json anno;
  try {
    in >> anno;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("unparsable annotation file " + anno_path.string() + ": " + e.what());
  }
  if (!anno.is_array()) throw ManifestError("annotation file " + anno_path.string() + " is not an array");

  std::vector<SampleRecord> records;
  for (const auto& item : anno) {
    try {
      if (item.at("category").get<std::string>() != "chair") continue;
      if (item.at("truncated").get<bool>() || item.at("occluded").get<bool>()) continue;
      const std::string img = item.at("img").get<std::string>();
      SampleRecord rec;
      rec.category = "chair";
      rec.object_id = fs::path(img).replace_extension("").string();
      rec.view_paths = {(fs::path(root) / img).string()};
      rec.voxel_path = (fs::path(root) / item.at("voxel").get<std::string>()).string();
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError("bad annotation entry in " + anno_path.string() + ": " + e.what());
    }
  }
  std::sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return a.object_id < b.object_id;
  });
  return records;
}

}  // namespace voxtr
