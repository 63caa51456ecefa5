#include "voxtr/train/metrics.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "voxtr/core/errors.hpp"

namespace voxtr {

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open metrics file " + path);
}

void MetricsWriter::append(const MetricsRecord& r) {
  nlohmann::ordered_json j{{"step", r.step}, {"loss", r.loss}, {"iou", r.iou}};
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed on metrics file " + path_);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open metrics file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<MetricsRecord> out;
  size_t start = 0;
  long line_no = 0;
  while (true) {
    const size_t nl = text.find('\n', start);
    if (nl == std::string::npos) break;  // unterminated tail: crash leftover, skip
    ++line_no;
    const std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step") || !j.contains("loss") || !j.contains("iou")) {
      throw IoError("malformed metrics record at " + path + ":" + std::to_string(line_no));
    }
    out.push_back({j["step"].get<long>(), j["loss"].get<double>(), j["iou"].get<double>()});
  }
  return out;
}

}  // namespace voxtr
