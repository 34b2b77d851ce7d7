#pragma once

#include <span>
#include <vector>

#include "fairsight/types.hpp"

namespace fairsight {

// Rank-based split-conformal threshold. With r = ceil((n+1)(1-alpha)) the
// r-th smallest score is returned (1-indexed), or infinite when r > n.
// Throws EMPTY_CALIBRATION on an empty list.
Threshold conformal_quantile(std::span<const double> scores, double alpha);

/// The rank r used by conformal_quantile.
std::size_t conformal_rank(std::size_t n, double alpha);

GroupStats compute_group_stats(std::span<const ClassificationRecord> records);
GroupStats compute_group_stats(std::span<const DetectionRecord> records);

struct EtaSearchRow {
  double eta = 1.0;
  double ap_prot = 0.0;
  double ap_nonprot = 0.0;
  double gap = 0.0;
  double mean_ap = 0.0;
};

struct KappaSearchRow {
  double kappa = 0.0;
  double delta_max = 0.0;
  double dpd = 0.0;
  double accuracy = 0.0;
};

struct EtaSelection {
  double eta = 1.0;
  std::vector<EtaSearchRow> table;
};

struct KappaSelection {
  double kappa = 0.0;
  double delta_max = 0.0;
  std::vector<KappaSearchRow> table;
};

// Simulates detection repair on the calibration records for every candidate
// and keeps the one with the smallest |AP gap|, then higher mean AP, then
// smaller |eta - 1|; the first two comparisons treat differences within
// params.eta_tie_tolerance as ties. Falls back to the candidate nearest 1 with an empty
// table when either group is absent.
EtaSelection select_eta(std::span<const DetectionRecord> records, const GroupStats& stats,
                        const HyperParams& params, const Threshold& base_q,
                        const Grid<Threshold>& region_q);

// Grid search over kappa_grid x delta_max_grid minimising DPD, accuracy as
// tie-break, then grid order. Keeps the configured constants with an empty
// table when either group is absent.
KappaSelection select_kappa(std::span<const ClassificationRecord> records,
                            const GroupStats& stats, const HyperParams& params,
                            const Threshold& base_q);

struct CalibrationReport {
  CalibrationArtifact artifact;
  std::vector<double> score_histogram;  // sorted calibration scores
  double violation_budget = 0.0;
  std::size_t rank = 0;
  std::vector<EtaSearchRow> eta_search_table;
  std::vector<KappaSearchRow> kappa_search_table;
};

// Offline phase. The result is a pure function of (records, params).
// Throws EMPTY_CALIBRATION or MIXED_TASK.
CalibrationReport calibrate(std::span<const Record> records, const HyperParams& params);
CalibrationReport calibrate(std::span<const ClassificationRecord> records,
                            const HyperParams& params);
CalibrationReport calibrate(std::span<const DetectionRecord> records, const HyperParams& params);

}  // namespace fairsight
