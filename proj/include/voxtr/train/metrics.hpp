#ifndef VOXTR_TRAIN_METRICS_HPP_
#define VOXTR_TRAIN_METRICS_HPP_

#include <fstream>
#include <string>
#include <vector>

namespace voxtr {

struct MetricsRecord {
  long step = 0;
  double loss = 0.0;
  double iou = 0.0;
};

// Append-only newline-delimited JSON, one {"step":..,"loss":..,"iou":..}
// record per line. Numbers serialize shortest-round-trip, so identical
// runs produce identical bytes. Each append flushes, keeping the file
// parseable after a crash (at worst one partial final line).
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);  // IoError if unopenable
  void append(const MetricsRecord& r);

 private:
  std::ofstream out_;
  std::string path_;
};

// Reads every newline-terminated record. A trailing fragment without a
// newline (crash leftover) is skipped; a malformed terminated line is a
// real corruption and raises IoError naming the path and line number.
std::vector<MetricsRecord> read_metrics(const std::string& path);

}  // namespace voxtr

#endif  // VOXTR_TRAIN_METRICS_HPP_
