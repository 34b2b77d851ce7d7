#include "fairsight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fairsight/error.hpp"
#include "fairsight/scoring.hpp"

namespace fairsight {

std::size_t predicted_label(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

std::vector<std::size_t> predicted_labels(std::span<const ClassificationRecord> records) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(predicted_label(r.logits));
  return out;
}

double accuracy(std::span<const ClassificationRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += predicted_label(r.logits) == r.ref_label;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double dpd(std::span<const ClassificationRecord> records,
           std::span<const std::size_t> predictions, std::size_t positive_class) {
  std::size_t count[2] = {0, 0};
  std::size_t positive[2] = {0, 0};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int g = records[i].protected_attr;
    ++count[g];
    positive[g] += predictions[i] == positive_class;
  }
  for (int g = 0; g < 2; ++g) {
    if (count[g] == 0) {
      throw Error(ErrorCode::EmptyGroup, "group " + std::to_string(g) + " has no records");
    }
  }
  const double r0 = static_cast<double>(positive[0]) / static_cast<double>(count[0]);
  const double r1 = static_cast<double>(positive[1]) / static_cast<double>(count[1]);
  return std::abs(r0 - r1);
}

GroupRates group_rates(std::span<const ClassificationRecord> records,
                       std::span<const std::size_t> predictions, std::size_t positive_class,
                       int group) {
  std::size_t pos = 0, neg = 0, tp = 0, fp = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].protected_attr != group) continue;
    const bool said_positive = predictions[i] == positive_class;
    if (records[i].ref_label == positive_class) {
      ++pos;
      tp += said_positive;
    } else {
      ++neg;
      fp += said_positive;
    }
  }
  GroupRates rates;
  if (pos > 0) rates.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) rates.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  return rates;
}

double eod(std::span<const ClassificationRecord> records,
           std::span<const std::size_t> predictions, std::size_t positive_class) {
  const GroupRates g0 = group_rates(records, predictions, positive_class, 0);
  const GroupRates g1 = group_rates(records, predictions, positive_class, 1);
  if (!g0.tpr || !g1.tpr || !g0.fpr || !g1.fpr) {
    throw Error(ErrorCode::UndefinedRate,
                "equalized odds needs positive and negative references in both groups");
  }
  return std::max(std::abs(*g0.tpr - *g1.tpr), std::abs(*g0.fpr - *g1.fpr));
}

double auc(std::span<const ClassificationRecord> records, std::span<const double> scores,
           std::size_t positive_class) {
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mid-ranks, 1-based, so tied scores share their average rank.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].ref_label == positive_class) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw Error(ErrorCode::UndefinedRate, "AUC needs both positive and negative references");
  }
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double counterfactual_distance(const ClassificationRecord& record) {
  const auto p = softmax(record.logits);
  const auto q = softmax(*record.counterfactual_logits);
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - q[i]) * (p[i] - q[i]);
  return std::sqrt(sq);
}

double individual_consistency(std::span<const ClassificationRecord> records, double delta) {
  std::size_t with_cf = 0, consistent = 0;
  for (const auto& r : records) {
    if (!r.counterfactual_logits) continue;
    ++with_cf;
    consistent += counterfactual_distance(r) <= delta;
  }
  if (with_cf == 0) {
    throw Error(ErrorCode::NoCounterfactuals, "no record carries counterfactual_logits");
  }
  return static_cast<double>(consistent) / static_cast<double>(with_cf);
}

double average_precision(std::span<const DetectionRecord> records, double iou_threshold) {
  if (records.empty()) throw Error(ErrorCode::EmptyGroup, "average precision of an empty group");

  struct Ranked {
    double confidence;
    bool true_positive;
  };
  std::vector<Ranked> ranked;
  std::size_t total_truth = 0;
  for (const auto& r : records) {
    total_truth += r.ground_truth.size();
    const Matching m = match_boxes(r.predictions, r.ground_truth, iou_threshold);
    std::vector<bool> tp(r.predictions.size(), false);
    for (const auto& pair : m.pairs) tp[pair.prediction] = true;
    for (std::size_t i = 0; i < r.predictions.size(); ++i) {
      ranked.push_back({r.predictions[i].confidence.value_or(0.0), tp[i]});
    }
  }
  if (total_truth == 0) return 0.0;

  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (ranked[i].true_positive ? tp : fp) += 1.0;
    precision[i] = tp / (tp + fp);
    recall[i] = tp / static_cast<double>(total_truth);
  }
  // Precision envelope: best precision at any recall at or beyond this point.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double area = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    area += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return area;
}

namespace {

std::vector<DetectionRecord> group_of(std::span<const DetectionRecord> records, int group) {
  std::vector<DetectionRecord> out;
  for (const auto& r : records) {
    if (r.protected_attr == group) out.push_back(r);
  }
  return out;
}

std::optional<double> mean_iou(std::span<const DetectionRecord> records, double iou_threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.ground_truth.empty()) continue;
    sum += 1.0 - detection_error(r, iou_threshold);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

DetectionReport ap_gap(std::span<const DetectionRecord> records, double iou_threshold) {
  const auto g0 = group_of(records, 0);
  const auto g1 = group_of(records, 1);
  if (g0.empty()) throw Error(ErrorCode::EmptyGroup, "group 0 (non-protected) has no records");
  if (g1.empty()) throw Error(ErrorCode::EmptyGroup, "group 1 (protected) has no records");

  DetectionReport report;
  report.ap_nonprot = average_precision(g0, iou_threshold);
  report.ap_prot = average_precision(g1, iou_threshold);
  report.gap = report.ap_nonprot - report.ap_prot;
  report.mean_iou_by_group = {mean_iou(g0, iou_threshold), mean_iou(g1, iou_threshold)};
  report.n_evaluated = records.size();
  return report;
}

ClassificationReport evaluate(std::span<const ClassificationRecord> records,
                              const HyperParams& params) {
  const auto predictions = predicted_labels(records);
  const std::size_t positive = params.positive_class;

  ClassificationReport report;
  report.n_evaluated = records.size();
  report.accuracy = accuracy(records);
  report.dpd = dpd(records, predictions, positive);
  report.group_fair = report.dpd <= params.epsilon;

  std::vector<double> positive_prob;
  positive_prob.reserve(records.size());
  for (const auto& r : records) {
    positive_prob.push_back(positive < r.logits.size() ? softmax(r.logits)[positive] : 0.0);
  }
  try {
    report.auc = auc(records, positive_prob, positive);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedRate) throw;
  }
  try {
    report.eod = eod(records, predictions, positive);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedRate) throw;
  }
  report.tpr_g0 = group_rates(records, predictions, positive, 0).tpr;
  report.tpr_g1 = group_rates(records, predictions, positive, 1).tpr;
  try {
    report.individual_consistency_rate = individual_consistency(records, params.delta);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCounterfactuals) throw;
  }
  return report;
}

DetectionReport evaluate(std::span<const DetectionRecord> records, const HyperParams& params) {
  return ap_gap(records, params.iou_threshold);
}

}  // namespace fairsight
