#include "fairsight/repair.hpp"

#include <algorithm>

#include "fairsight/error.hpp"
#include "fairsight/scoring.hpp"

namespace fairsight {

double logit_correction(double score, double q, double kappa, double delta_max) {
  return std::min(kappa * (score - q), delta_max);
}

std::vector<double> repair_classification(const ClassificationRecord& record, double score,
                                          double q, const HyperParams& params) {
  std::vector<double> logits = record.logits;
  logits[record.ref_label] += logit_correction(score, q, params.kappa, params.delta_max);
  return logits;
}

std::vector<BoundingBox> repair_detection(const DetectionRecord& record,
                                          const std::vector<RegionIndex>& violated_regions,
                                          int grid, double eta) {
  std::vector<BoundingBox> boxes = record.predictions;
  if (record.protected_attr != 1) return boxes;

  for (auto& box : boxes) {
    if (!violated_regions.empty()) {
      const RegionIndex cell = region_of(box, record.image_w, record.image_h, grid);
      if (std::find(violated_regions.begin(), violated_regions.end(), cell) ==
          violated_regions.end()) {
        continue;
      }
    }
    box.confidence = std::clamp(eta * box.confidence.value_or(0.0), 0.0, 1.0);
  }
  return boxes;
}

double adaptive_update(double q, double score, double gamma) {
  // min{q, score} = q makes the step the identity; evaluating the convex
  // combination anyway can drift q by an ulp.
  if (!(score < q)) return q;
  return std::min(q, gamma * q + (1.0 - gamma) * score);
}

Threshold adaptive_update(const Threshold& q, double score, double gamma) {
  if (q.is_infinite()) return q;
  return Threshold::finite(adaptive_update(q.value(), score, gamma));
}

OnlineEngine::OnlineEngine(CalibrationArtifact artifact, EngineMode mode)
    : artifact_(std::move(artifact)), mode_(mode), current_q_(artifact_.q_alpha) {}

RepairOutcome OnlineEngine::process(const Record& record) {
  if (task_of(record) != artifact_.task) {
    throw Error(ErrorCode::TaskMismatch,
                "record '" + id_of(record) + "' is " + std::string(to_string(task_of(record))) +
                    " but the artifact was calibrated for " +
                    std::string(to_string(artifact_.task)));
  }
  ++processed_;
  if (const auto* c = std::get_if<ClassificationRecord>(&record)) {
    return process_classification(*c);
  }
  return process_detection(std::get<DetectionRecord>(record));
}

void OnlineEngine::on_violation(double score) {
  ++violations_;
  if (artifact_.params.adaptive_enabled) {
    current_q_ = adaptive_update(current_q_, score, artifact_.params.gamma);
  }
}

RepairOutcome OnlineEngine::process_classification(const ClassificationRecord& record) {
  RepairOutcome out;
  out.id = record.id;
  out.threshold_before = current_q_;
  out.original_output = record.logits;
  out.repaired_output = record.logits;
  if (mode_ == EngineMode::passthrough) {
    out.threshold_after = current_q_;
    return out;
  }

  const double score = record_score(record, artifact_.stats, artifact_.params);
  out.score = score;
  if (current_q_.exceeded_by(score)) {
    out.repaired = true;
    out.repaired_output =
        repair_classification(record, score, current_q_.value(), artifact_.params);
    on_violation(score);
  }
  out.threshold_after = current_q_;
  return out;
}

RepairOutcome OnlineEngine::process_detection(const DetectionRecord& record) {
  RepairOutcome out;
  out.id = record.id;
  out.threshold_before = current_q_;
  out.original_output = record.predictions;
  out.repaired_output = record.predictions;
  out.violated_regions = std::vector<RegionIndex>{};
  if (mode_ == EngineMode::passthrough) {
    out.threshold_after = current_q_;
    return out;
  }

  const HyperParams& params = artifact_.params;
  const RegionalScores regional = regional_scores(record, artifact_.stats, params);
  const double score = aggregate(regional.score, params.region_aggregation);
  out.score = score;

  std::vector<RegionIndex> violated;
  if (artifact_.region_q) {
    for (int r = 0; r < params.grid; ++r) {
      for (int c = 0; c < params.grid; ++c) {
        if (regional.nonempty.at(r, c) &&
            artifact_.region_q->at(r, c).exceeded_by(regional.score.at(r, c))) {
          violated.push_back({r, c});
        }
      }
    }
  }

  if (current_q_.exceeded_by(score) || !violated.empty()) {
    out.repaired = true;
    out.repaired_output = repair_detection(record, violated, params.grid, artifact_.eta_selected);
    out.violated_regions = violated;
    on_violation(score);
  }
  out.threshold_after = current_q_;
  return out;
}

}  // namespace fairsight
