#include "fairsight/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairsight/error.hpp"

namespace fairsight {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double true_class_confidence(const ClassificationRecord& record) {
  return softmax(record.logits)[record.ref_label];
}

double classification_error(const ClassificationRecord& record) {
  return 1.0 - true_class_confidence(record);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Matching match_boxes(std::span<const BoundingBox> predictions,
                     std::span<const BoundingBox> ground_truth, double iou_threshold) {
  Matching m;
  std::vector<bool> used(ground_truth.size(), false);
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    double best = -1.0;
    std::size_t best_g = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g] || ground_truth[g].class_id != predictions[p].class_id) continue;
      const double v = iou(predictions[p], ground_truth[g]);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < ground_truth.size()) {
      used[best_g] = true;
      m.pairs.push_back({p, best_g, best});
    } else {
      m.unmatched_predictions.push_back(p);
    }
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    if (!used[g]) m.unmatched_ground_truth.push_back(g);
  }
  return m;
}

double detection_error(std::span<const BoundingBox> predictions,
                       std::span<const BoundingBox> ground_truth, double iou_threshold) {
  if (ground_truth.empty()) return 0.0;
  const Matching m = match_boxes(predictions, ground_truth, iou_threshold);
  double sum = 0.0;
  for (const auto& pair : m.pairs) sum += pair.iou;
  return 1.0 - sum / static_cast<double>(ground_truth.size());
}

double detection_error(const DetectionRecord& record, double iou_threshold) {
  return detection_error(record.predictions, record.ground_truth, iou_threshold);
}

double mean_confidence(std::span<const BoundingBox> predictions) {
  if (predictions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& b : predictions) sum += b.confidence.value_or(0.0);
  return sum / static_cast<double>(predictions.size());
}

namespace {

double opposite_mean(int protected_attr, const GroupStats& stats, const std::string& id) {
  const auto& mean = stats.mean_of(1 - protected_attr);
  if (!mean) {
    throw Error(ErrorCode::UndefinedGroupMean,
                "record '" + id + "': calibration has no records in group " +
                    std::to_string(1 - protected_attr));
  }
  return *mean;
}

double shortfall(double reference, double value) { return std::max(0.0, reference - value); }

ScoreBreakdown combine(double error, double penalty, double lambda) {
  return {error, penalty, error + lambda * penalty};
}

}  // namespace

double fairness_penalty_classification(const ClassificationRecord& record,
                                       const GroupStats& stats) {
  return shortfall(opposite_mean(record.protected_attr, stats, record.id),
                   true_class_confidence(record));
}

double fairness_penalty_detection(const DetectionRecord& record, const GroupStats& stats) {
  return shortfall(opposite_mean(record.protected_attr, stats, record.id),
                   mean_confidence(record.predictions));
}

ScoreBreakdown nonconformity(const ClassificationRecord& record, const GroupStats& stats,
                             const HyperParams& params) {
  const double error = classification_error(record);
  const double penalty =
      params.lambda > 0.0 ? fairness_penalty_classification(record, stats) : 0.0;
  return combine(error, penalty, params.lambda);
}

ScoreBreakdown nonconformity(const DetectionRecord& record, const GroupStats& stats,
                             const HyperParams& params) {
  const double error = detection_error(record, params.iou_threshold);
  const double penalty = params.lambda > 0.0 ? fairness_penalty_detection(record, stats) : 0.0;
  return combine(error, penalty, params.lambda);
}

RegionIndex region_of(const BoundingBox& box, int image_w, int image_h, int grid) {
  auto bin = [grid](double centre, int extent) {
    const int cell = static_cast<int>(std::floor(centre / extent * grid));
    return std::clamp(cell, 0, grid - 1);
  };
  return {bin(box.center_y(), image_h), bin(box.center_x(), image_w)};
}

RegionalScores regional_scores(const DetectionRecord& record, const GroupStats& stats,
                               const HyperParams& params) {
  const int g = params.grid;
  RegionalScores out{Grid<double>(g, 0.0), Grid<bool>(g, false)};

  Grid<std::vector<BoundingBox>> preds(g, {});
  Grid<std::vector<BoundingBox>> truth(g, {});
  for (const auto& b : record.predictions) {
    preds.at(region_of(b, record.image_w, record.image_h, g)).push_back(b);
  }
  for (const auto& b : record.ground_truth) {
    truth.at(region_of(b, record.image_w, record.image_h, g)).push_back(b);
  }

  const bool penalised = params.lambda > 0.0;
  const double reference =
      penalised ? opposite_mean(record.protected_attr, stats, record.id) : 0.0;

  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const auto& p = preds.at(r, c);
      const auto& t = truth.at(r, c);
      if (p.empty() && t.empty()) continue;
      const double error = detection_error(p, t, params.iou_threshold);
      const double penalty = penalised ? shortfall(reference, mean_confidence(p)) : 0.0;
      out.score.at(r, c) = combine(error, penalty, params.lambda).total;
      out.nonempty.at(r, c) = true;
    }
  }
  return out;
}

double aggregate(const Grid<double>& cells, RegionAggregation agg) {
  const auto& v = cells.cells();
  if (v.empty()) return 0.0;
  if (agg == RegionAggregation::sum) return std::accumulate(v.begin(), v.end(), 0.0);
  return *std::max_element(v.begin(), v.end());
}

double record_score(const ClassificationRecord& record, const GroupStats& stats,
                    const HyperParams& params) {
  return nonconformity(record, stats, params).total;
}

double record_score(const DetectionRecord& record, const GroupStats& stats,
                    const HyperParams& params) {
  return aggregate(regional_scores(record, stats, params).score, params.region_aggregation);
}

double record_score(const Record& record, const GroupStats& stats, const HyperParams& params) {
  return std::visit([&](const auto& r) { return record_score(r, stats, params); }, record);
}

}  // namespace fairsight
