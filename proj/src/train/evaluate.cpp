#include "voxtr/train/evaluate.hpp"

#include <stdexcept>
#include <vector>

namespace voxtr {

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"per_category_iou", r.per_category_iou},
                     {"overall_iou", r.overall_iou},
                     {"per_example_iou", r.per_example_iou},
                     {"views_used", r.views_used},
                     {"threshold", r.threshold},
                     {"sample_count", r.sample_count}};
}

EvalReport evaluate_model(const VoxtrModel& model, const SampleSource& data, long v_eval,
                          double threshold_at, uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("evaluation needs a non-empty split");

  EvalReport report;
  report.views_used = v_eval;
  report.threshold = threshold_at;
  report.sample_count = data.size();

  // std::map keeps categories sorted, so the reduction order (and thus the
  // report) is deterministic regardless of dataset order.
  std::map<std::string, double> sums;
  std::map<std::string, long> counts;
  double example_sum = 0.0;
  for (long i = 0; i < data.size(); ++i) {
    ResolvedSample s = data.resolve(i, v_eval, seed);
    VoxelField pred = model.predict(s.views);
    const double score = iou(threshold(pred, threshold_at), s.target);
    sums[s.category] += score;
    counts[s.category] += 1;
    example_sum += score;
  }

  double category_sum = 0.0;
  for (const auto& [category, sum] : sums) {
    const double mean = sum / static_cast<double>(counts[category]);
    report.per_category_iou[category] = mean;
    category_sum += mean;
  }
  report.overall_iou = category_sum / static_cast<double>(report.per_category_iou.size());
  report.per_example_iou = example_sum / static_cast<double>(data.size());
  return report;
}

CrossTable multi_view_cross_table(const std::map<long, const VoxtrModel*>& models,
                                  const std::vector<long>& eval_views, const SampleSource& data,
                                  double threshold_at, uint64_t seed) {
  if (models.empty() || eval_views.empty()) {
    throw std::invalid_argument("cross table needs at least one model and one eval view count");
  }
  nlohmann::json reference;
  to_json(reference, models.begin()->second->config());
  for (const auto& [v_train, model] : models) {
    nlohmann::json geometry;
    to_json(geometry, model->config());
    if (geometry != reference) {
      throw std::invalid_argument("cross table: model trained with " + std::to_string(v_train) +
                                  " views has a different geometry");
    }
  }

  CrossTable table;
  table.eval_views = eval_views;
  for (const auto& [v_train, model] : models) {
    table.train_views.push_back(v_train);
    std::vector<double> row;
    for (long v : eval_views) {
      row.push_back(evaluate_model(*model, data, v, threshold_at, seed).overall_iou);
    }
    table.overall_iou.push_back(std::move(row));
  }
  return table;
}

void to_json(nlohmann::json& j, const CrossTable& t) {
  j = nlohmann::json{{"train_views", t.train_views},
                     {"eval_views", t.eval_views},
                     {"overall_iou", t.overall_iou}};
}

}  // namespace voxtr
