#include "fairsight/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairsight/error.hpp"
#include "fairsight/metrics.hpp"
#include "fairsight/repair.hpp"
#include "fairsight/scoring.hpp"
#include "fairsight/validate.hpp"

namespace fairsight {

std::size_t conformal_rank(std::size_t n, double alpha) {
  // The slack absorbs representation error in (1 - alpha) so that, e.g.,
  // n = 99 and alpha = 0.1 give exactly rank 90.
  const long double target =
      static_cast<long double>(n + 1) * (1.0L - static_cast<long double>(alpha));
  return static_cast<std::size_t>(std::ceil(target - 1e-9L));
}

Threshold conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw Error(ErrorCode::EmptyCalibration, "no calibration scores");
  const std::size_t r = conformal_rank(scores.size(), alpha);
  if (r > scores.size()) return Threshold::infinite();
  std::vector<double> sorted(scores.begin(), scores.end());
  const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(r, 1) - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return Threshold::finite(*nth);
}

namespace {

template <class R, class Statistic>
GroupStats group_means(std::span<const R> records, Statistic statistic) {
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (const auto& r : records) {
    const int g = r.protected_attr;
    sum[g] += statistic(r);
    ++count[g];
  }
  GroupStats stats;
  stats.count_g0 = count[0];
  stats.count_g1 = count[1];
  if (count[0] > 0) stats.mean_conf_g0 = sum[0] / static_cast<double>(count[0]);
  if (count[1] > 0) stats.mean_conf_g1 = sum[1] / static_cast<double>(count[1]);
  return stats;
}

bool both_groups(const GroupStats& stats) { return stats.count_g0 > 0 && stats.count_g1 > 0; }

}  // namespace

GroupStats compute_group_stats(std::span<const ClassificationRecord> records) {
  return group_means(records,
                     [](const ClassificationRecord& r) { return true_class_confidence(r); });
}

GroupStats compute_group_stats(std::span<const DetectionRecord> records) {
  return group_means(records,
                     [](const DetectionRecord& r) { return mean_confidence(r.predictions); });
}

KappaSelection select_kappa(std::span<const ClassificationRecord> records,
                            const GroupStats& stats, const HyperParams& params,
                            const Threshold& base_q) {
  KappaSelection selection{params.kappa, params.delta_max, {}};
  if (!both_groups(stats)) return selection;

  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(record_score(r, stats, params));

  bool have_best = false;
  double best_dpd = 0.0, best_acc = 0.0;
  for (double kappa : params.kappa_grid) {
    for (double delta_max : params.delta_max_grid) {
      HyperParams trial = params;
      trial.kappa = kappa;
      trial.delta_max = delta_max;
      std::vector<ClassificationRecord> repaired(records.begin(), records.end());
      for (std::size_t i = 0; i < repaired.size(); ++i) {
        if (base_q.exceeded_by(scores[i])) {
          repaired[i].logits =
              repair_classification(records[i], scores[i], base_q.value(), trial);
        }
      }
      const auto predictions = predicted_labels(repaired);
      const KappaSearchRow row{kappa, delta_max,
                               dpd(repaired, predictions, params.positive_class),
                               accuracy(repaired)};
      selection.table.push_back(row);
      if (!have_best || row.dpd < best_dpd || (row.dpd == best_dpd && row.accuracy > best_acc)) {
        have_best = true;
        best_dpd = row.dpd;
        best_acc = row.accuracy;
        selection.kappa = kappa;
        selection.delta_max = delta_max;
      }
    }
  }
  return selection;
}

namespace {

struct DetectionViolation {
  bool any = false;
  std::vector<RegionIndex> regions;
};

DetectionViolation find_violation(const DetectionRecord& record, const GroupStats& stats,
                                  const HyperParams& params, const Threshold& base_q,
                                  const Grid<Threshold>& region_q) {
  const RegionalScores regional = regional_scores(record, stats, params);
  DetectionViolation v;
  for (int r = 0; r < params.grid; ++r) {
    for (int c = 0; c < params.grid; ++c) {
      if (regional.nonempty.at(r, c) && region_q.at(r, c).exceeded_by(regional.score.at(r, c))) {
        v.regions.push_back({r, c});
      }
    }
  }
  v.any = !v.regions.empty() ||
          base_q.exceeded_by(aggregate(regional.score, params.region_aggregation));
  return v;
}

}  // namespace

EtaSelection select_eta(std::span<const DetectionRecord> records, const GroupStats& stats,
                        const HyperParams& params, const Threshold& base_q,
                        const Grid<Threshold>& region_q) {
  const auto& candidates = params.eta_candidates;
  auto nearest_one = [&] {
    return *std::min_element(candidates.begin(), candidates.end(), [](double a, double b) {
      return std::abs(a - 1.0) < std::abs(b - 1.0);
    });
  };
  EtaSelection selection{nearest_one(), {}};
  if (!both_groups(stats)) return selection;

  std::vector<DetectionViolation> violations;
  violations.reserve(records.size());
  for (const auto& r : records) {
    violations.push_back(find_violation(r, stats, params, base_q, region_q));
  }

  for (double eta : candidates) {
    std::vector<DetectionRecord> repaired(records.begin(), records.end());
    for (std::size_t i = 0; i < repaired.size(); ++i) {
      if (violations[i].any) {
        repaired[i].predictions =
            repair_detection(records[i], violations[i].regions, params.grid, eta);
      }
    }
    const DetectionReport report = ap_gap(repaired, params.iou_threshold);
    selection.table.push_back({eta, report.ap_prot, report.ap_nonprot, report.gap,
                               0.5 * (report.ap_prot + report.ap_nonprot)});
  }

  const double tol = params.eta_tie_tolerance;
  const auto& table = selection.table;
  double min_gap = std::abs(table.front().gap);
  for (const auto& row : table) min_gap = std::min(min_gap, std::abs(row.gap));
  double best_ap = -1.0;
  for (const auto& row : table) {
    if (std::abs(row.gap) <= min_gap + tol) best_ap = std::max(best_ap, row.mean_ap);
  }
  bool have_best = false;
  for (const auto& row : table) {
    if (std::abs(row.gap) > min_gap + tol || row.mean_ap < best_ap - tol) continue;
    if (!have_best || std::abs(row.eta - 1.0) < std::abs(selection.eta - 1.0)) {
      selection.eta = row.eta;
      have_best = true;
    }
  }
  return selection;
}

namespace {

void require_nonempty(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::EmptyCalibration, "calibration set is empty");
}

CalibrationReport finish(CalibrationArtifact artifact, std::vector<double> scores) {
  CalibrationReport report;
  std::sort(scores.begin(), scores.end());
  report.score_histogram = std::move(scores);
  report.violation_budget = artifact.params.alpha;
  report.rank = conformal_rank(artifact.n, artifact.params.alpha);
  report.artifact = std::move(artifact);
  return report;
}

}  // namespace

CalibrationReport calibrate(std::span<const ClassificationRecord> records,
                            const HyperParams& params) {
  validate(params);
  require_nonempty(records.size());

  CalibrationArtifact artifact;
  artifact.task = Task::classification;
  artifact.params = params;
  artifact.n = records.size();
  artifact.stats = compute_group_stats(records);

  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(record_score(r, artifact.stats, params));
  artifact.q_alpha = conformal_quantile(scores, params.alpha);

  KappaSelection kappa = select_kappa(records, artifact.stats, params, artifact.q_alpha);
  artifact.params.kappa = kappa.kappa;
  artifact.params.delta_max = kappa.delta_max;

  CalibrationReport report = finish(std::move(artifact), std::move(scores));
  report.kappa_search_table = std::move(kappa.table);
  return report;
}

CalibrationReport calibrate(std::span<const DetectionRecord> records, const HyperParams& params) {
  validate(params);
  require_nonempty(records.size());

  CalibrationArtifact artifact;
  artifact.task = Task::detection;
  artifact.params = params;
  artifact.n = records.size();
  artifact.stats = compute_group_stats(records);

  const int g = params.grid;
  std::vector<double> scores;
  scores.reserve(records.size());
  Grid<std::vector<double>> cell_scores(g, {});
  for (const auto& r : records) {
    const RegionalScores regional = regional_scores(r, artifact.stats, params);
    scores.push_back(aggregate(regional.score, params.region_aggregation));
    for (int row = 0; row < g; ++row) {
      for (int col = 0; col < g; ++col) {
        if (regional.nonempty.at(row, col)) {
          cell_scores.at(row, col).push_back(regional.score.at(row, col));
        }
      }
    }
  }
  artifact.q_alpha = conformal_quantile(scores, params.alpha);

  Grid<Threshold> region_q(g, Threshold::infinite());
  for (int row = 0; row < g; ++row) {
    for (int col = 0; col < g; ++col) {
      const auto& cell = cell_scores.at(row, col);
      if (!cell.empty()) region_q.at(row, col) = conformal_quantile(cell, params.alpha);
    }
  }

  EtaSelection eta = select_eta(records, artifact.stats, params, artifact.q_alpha, region_q);
  artifact.eta_selected = eta.eta;
  artifact.region_q = std::move(region_q);

  CalibrationReport report = finish(std::move(artifact), std::move(scores));
  report.eta_search_table = std::move(eta.table);
  return report;
}

CalibrationReport calibrate(std::span<const Record> records, const HyperParams& params) {
  require_nonempty(records.size());
  const Task task = task_of(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (task_of(records[i]) != task) {
      throw Error(ErrorCode::MixedTask, "record '" + id_of(records[i]) + "' is " +
                                            std::string(to_string(task_of(records[i]))) +
                                            ", expected " + std::string(to_string(task)));
    }
  }
  if (task == Task::classification) {
    std::vector<ClassificationRecord> typed;
    typed.reserve(records.size());
    for (const auto& r : records) typed.push_back(std::get<ClassificationRecord>(r));
    return calibrate(std::span<const ClassificationRecord>(typed), params);
  }
  std::vector<DetectionRecord> typed;
  typed.reserve(records.size());
  for (const auto& r : records) typed.push_back(std::get<DetectionRecord>(r));
  return calibrate(std::span<const DetectionRecord>(typed), params);
}

}  // namespace fairsight
