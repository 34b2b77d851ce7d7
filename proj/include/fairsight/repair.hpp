#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairsight/types.hpp"

namespace fairsight {

/// Logit correction min{kappa * (score - q), delta_max}.
double logit_correction(double score, double q, double kappa, double delta_max);

// Adds the bounded correction to the ref_label logit; every other entry is
// left untouched.
std::vector<double> repair_classification(const ClassificationRecord& record, double score,
                                          double q, const HyperParams& params);

// Scales protected-group prediction confidences by eta, clamped to [0,1].
// With violated regions only boxes whose centre lies in one of them are
// scaled; with none, every prediction is. Non-protected records pass through.
std::vector<BoundingBox> repair_detection(const DetectionRecord& record,
                                          const std::vector<RegionIndex>& violated_regions,
                                          int grid, double eta);

/// gamma * q + (1 - gamma) * min{q, score}.
double adaptive_update(double q, double score, double gamma);
Threshold adaptive_update(const Threshold& q, double score, double gamma);

using ModelOutput = std::variant<std::vector<double>, std::vector<BoundingBox>>;

struct RepairOutcome {
  std::string id;
  std::optional<double> score;  // absent in passthrough mode
  Threshold threshold_before;
  bool repaired = false;
  ModelOutput original_output;
  ModelOutput repaired_output;
  Threshold threshold_after;
  std::optional<std::vector<RegionIndex>> violated_regions;  // detection only
};

enum class EngineMode {
  enforce,
  passthrough,  // no scoring, no repair
};

// Online phase. Single writer: one logical stream per engine.
class OnlineEngine {
 public:
  explicit OnlineEngine(CalibrationArtifact artifact, EngineMode mode = EngineMode::enforce);

  // Throws TASK_MISMATCH when the record's task differs from the artifact's.
  RepairOutcome process(const Record& record);

  const CalibrationArtifact& artifact() const { return artifact_; }
  const Threshold& current_q() const { return current_q_; }
  std::size_t processed_count() const { return processed_; }
  std::size_t violation_count() const { return violations_; }

 private:
  RepairOutcome process_classification(const ClassificationRecord& record);
  RepairOutcome process_detection(const DetectionRecord& record);
  void on_violation(double score);

  CalibrationArtifact artifact_;
  EngineMode mode_;
  Threshold current_q_;
  std::size_t processed_ = 0;
  std::size_t violations_ = 0;
};

}  // namespace fairsight
