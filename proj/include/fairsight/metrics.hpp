#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fairsight/types.hpp"

namespace fairsight {

/// argmax with ties resolved to the lowest index.
std::size_t predicted_label(std::span<const double> logits);
std::vector<std::size_t> predicted_labels(std::span<const ClassificationRecord> records);

double accuracy(std::span<const ClassificationRecord> records);

// Demographic parity difference |P(yhat=pos | A=0) - P(yhat=pos | A=1)|.
// Throws EMPTY_GROUP naming the empty group.
double dpd(std::span<const ClassificationRecord> records,
           std::span<const std::size_t> predictions, std::size_t positive_class);

struct GroupRates {
  std::optional<double> tpr;
  std::optional<double> fpr;
};

// TPR/FPR of one group against the positive class; each rate is absent when
// its denominator is zero.
GroupRates group_rates(std::span<const ClassificationRecord> records,
                       std::span<const std::size_t> predictions, std::size_t positive_class,
                       int group);

// Equalized odds difference max(|TPR0-TPR1|, |FPR0-FPR1|). Throws
// UNDEFINED_RATE unless both groups hold positives and negatives.
double eod(std::span<const ClassificationRecord> records,
           std::span<const std::size_t> predictions, std::size_t positive_class);

// Mann-Whitney AUC of `scores` against ref_label == positive_class; ties
// count one half. Throws UNDEFINED_RATE without both classes.
double auc(std::span<const ClassificationRecord> records, std::span<const double> scores,
           std::size_t positive_class);

/// Euclidean distance between the factual and counterfactual softmax outputs.
double counterfactual_distance(const ClassificationRecord& record);

// Fraction of records carrying counterfactual logits whose distance is
// within delta. Throws NO_COUNTERFACTUALS when none carry them.
double individual_consistency(std::span<const ClassificationRecord> records, double delta);

// All-point interpolated AP over the pooled predictions of the given records
// (expected to be one group). Zero without ground truth. Throws EMPTY_GROUP
// on an empty span.
double average_precision(std::span<const DetectionRecord> records, double iou_threshold);

struct ClassificationReport {
  double accuracy = 0.0;
  std::optional<double> auc;
  double dpd = 0.0;
  std::optional<double> eod;
  std::optional<double> tpr_g0;
  std::optional<double> tpr_g1;
  std::optional<double> individual_consistency_rate;
  bool group_fair = false;
  std::size_t n_evaluated = 0;
};

struct DetectionReport {
  double ap_prot = 0.0;
  double ap_nonprot = 0.0;
  double gap = 0.0;  // ap_nonprot - ap_prot
  std::pair<std::optional<double>, std::optional<double>> mean_iou_by_group;
  std::size_t n_evaluated = 0;
};

/// Throws EMPTY_GROUP when either group is missing.
DetectionReport ap_gap(std::span<const DetectionRecord> records, double iou_threshold);

ClassificationReport evaluate(std::span<const ClassificationRecord> records,
                              const HyperParams& params);
DetectionReport evaluate(std::span<const DetectionRecord> records, const HyperParams& params);

}  // namespace fairsight
