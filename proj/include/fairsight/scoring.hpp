#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fairsight/types.hpp"

namespace fairsight {

// Non-conformity score decomposition: total = error + lambda * penalty.
struct ScoreBreakdown {
  double error = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// Max-subtracted softmax; entries are positive and sum to one.
std::vector<double> softmax(std::span<const double> logits);

/// Softmax probability of the reference class.
double true_class_confidence(const ClassificationRecord& record);

/// 1 - softmax(logits)[ref_label].
double classification_error(const ClassificationRecord& record);

double iou(const BoundingBox& a, const BoundingBox& b);

struct BoxMatch {
  std::size_t prediction = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;
};

struct Matching {
  std::vector<BoxMatch> pairs;
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_ground_truth;
};

// Greedy one-to-one matching. Predictions are visited in the given order
// (canonical order is descending confidence); each takes the unused
// same-class ground-truth box of highest IoU when that IoU reaches the
// threshold. Ties go to the lower ground-truth index.
Matching match_boxes(std::span<const BoundingBox> predictions,
                     std::span<const BoundingBox> ground_truth, double iou_threshold);

/// 1 - mean IoU over ground truth, unmatched ground truth counting as 0.
/// Zero when there is no ground truth.
double detection_error(std::span<const BoundingBox> predictions,
                       std::span<const BoundingBox> ground_truth, double iou_threshold);
double detection_error(const DetectionRecord& record, double iou_threshold);

/// Mean prediction confidence, 0 without predictions.
double mean_confidence(std::span<const BoundingBox> predictions);

// One-sided shortfall of this record's confidence statistic against the
// opposite group's calibration mean. Throws UNDEFINED_GROUP_MEAN when that
// group was empty.
double fairness_penalty_classification(const ClassificationRecord& record,
                                       const GroupStats& stats);
double fairness_penalty_detection(const DetectionRecord& record, const GroupStats& stats);

// Whole-record score. A zero lambda skips the penalty term entirely, so an
// undefined opposite-group mean is only an error when lambda > 0.
ScoreBreakdown nonconformity(const ClassificationRecord& record, const GroupStats& stats,
                             const HyperParams& params);
ScoreBreakdown nonconformity(const DetectionRecord& record, const GroupStats& stats,
                             const HyperParams& params);

/// Cell containing the box centre on a uniform G x G grid.
RegionIndex region_of(const BoundingBox& box, int image_w, int image_h, int grid);

struct RegionalScores {
  Grid<double> score;    // 0 for empty cells
  Grid<bool> nonempty;   // cell holds at least one box
};

// Per-cell scores: each cell is scored over only the predictions and ground
// truth whose centres fall inside it.
RegionalScores regional_scores(const DetectionRecord& record, const GroupStats& stats,
                               const HyperParams& params);

double aggregate(const Grid<double>& cells, RegionAggregation agg);

// The score thresholded against q_alpha: the breakdown total for
// classification, the aggregate of the regional scores for detection.
double record_score(const ClassificationRecord& record, const GroupStats& stats,
                    const HyperParams& params);
double record_score(const DetectionRecord& record, const GroupStats& stats,
                    const HyperParams& params);
double record_score(const Record& record, const GroupStats& stats, const HyperParams& params);

}  // namespace fairsight
