#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsight/calibration.hpp"
#include "fairsight/config.hpp"
#include "fairsight/io.hpp"
#include "fairsight/metrics.hpp"
#include "fairsight/repair.hpp"
#include "fairsight/synthgen.hpp"
#include "fairsight/types.hpp"

namespace fairsight {

struct RunConfig {
  std::optional<Task> task;  // unset: taken from the data
  std::filesystem::path out_dir = ".";
  std::filesystem::path calibration_path;
  std::filesystem::path test_path;  // "-" streams stdin to stdout
  std::filesystem::path artifact_path;
  std::filesystem::path outcomes_path;

  HyperParams params;
  // Apply-time overrides of the artifact's adaptive settings.
  std::optional<bool> adaptive_override;
  std::optional<double> gamma_override;

  BiasScenario scenario;
  std::size_t n_test = 0;

  std::string sweep_axis;
  std::vector<double> sweep_values;
};

// Builds a RunConfig from settings, rejecting unknown keys and invalid
// ranges with ConfigError before any work starts.
RunConfig load_run_config(const Config& cfg);

/// Seed of the test split written next to the calibration split.
std::uint64_t test_seed(std::uint64_t seed);

struct ApplyResult {
  std::vector<RepairOutcome> outcomes;
  std::size_t processed = 0;
  std::size_t violations = 0;
  Threshold final_q;
};

ApplyResult apply_records(const CalibrationArtifact& artifact, std::span<const Record> records,
                          EngineMode mode = EngineMode::enforce);

// Test records with their outputs replaced by the repaired ones. Outcomes
// must line up with the records one to one, by id.
std::vector<Record> repaired_records(std::span<const Record> records,
                                     std::span<const RepairOutcome> outcomes);

struct Evaluation {
  Task task = Task::classification;
  std::optional<ClassificationReport> classification_before, classification_after;
  std::optional<DetectionReport> detection_before, detection_after;
};

Evaluation evaluate_pair(std::span<const Record> original, std::span<const Record> repaired,
                         const HyperParams& params);

Json report_json(const Evaluation& evaluation);
// Header plus one row per phase (before, after).
std::string report_csv(const Evaluation& evaluation);

// Parameters for one sweep point. The repair constants are pinned to the
// current values (or the swept value) so only the swept knob moves.
HyperParams sweep_params(const HyperParams& base, const std::string& axis, double value);

struct SweepRow {
  double value = 0.0;
  Threshold q_alpha;
  double violation_rate = 0.0;
  Evaluation evaluation;
};

std::vector<SweepRow> run_sweep(std::span<const Record> calibration, std::span<const Record> test,
                                const HyperParams& base, const std::string& axis,
                                std::span<const double> values);
std::string sweep_csv(const std::string& axis, std::span<const SweepRow> rows);

// Subcommands. `log` receives the human-readable summary.
void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_calibrate(const RunConfig& cfg, std::ostream& log);
void cmd_apply(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& log);
void cmd_evaluate(const RunConfig& cfg, std::ostream& log);
void cmd_sweep(const RunConfig& cfg, std::ostream& log);

}  // namespace fairsight
