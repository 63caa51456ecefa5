#ifndef VOXTR_TRAIN_EVALUATE_HPP_
#define VOXTR_TRAIN_EVALUATE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxtr/model/model.hpp"
#include "voxtr/train/data_source.hpp"

namespace voxtr {

// Fixed, documented seed for evaluation-time view sampling, so reports are
// reproducible run to run.
inline constexpr uint64_t kEvalSeed = 20211019;

struct EvalReport {
  std::map<std::string, double> per_category_iou;  // sorted by category
  double overall_iou = 0.0;     // arithmetic mean of the per-category values
  double per_example_iou = 0.0;  // mean over objects, emitted for comparability
  long views_used = 0;
  double threshold = 0.5;
  long sample_count = 0;
};

void to_json(nlohmann::json& j, const EvalReport& r);

// Per object: draw v_eval views (eval seed), predict, threshold, IoU
// against ground truth; aggregate per category, then mean over categories.
// Empty source -> std::invalid_argument.
EvalReport evaluate_model(const VoxtrModel& model, const SampleSource& data, long v_eval,
                          double threshold = 0.5, uint64_t seed = kEvalSeed);

// Rows = training view counts (map order), columns = the v_eval list,
// cells = overall IoU. Models must share identical geometry (config JSON
// equality); mismatch -> std::invalid_argument.
struct CrossTable {
  std::vector<long> train_views;
  std::vector<long> eval_views;
  std::vector<std::vector<double>> overall_iou;  // [row][col]
};

CrossTable multi_view_cross_table(const std::map<long, const VoxtrModel*>& models,
                                  const std::vector<long>& eval_views, const SampleSource& data,
                                  double threshold = 0.5, uint64_t seed = kEvalSeed);

void to_json(nlohmann::json& j, const CrossTable& t);

}  // namespace voxtr

#endif  // VOXTR_TRAIN_EVALUATE_HPP_
