#include "fairsight/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fairsight/error.hpp"
#include "fairsight/validate.hpp"

namespace fairsight {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "task",
      "paths.out", "paths.calibration", "paths.test", "paths.artifact", "paths.outcomes",
      "params.alpha", "params.lambda", "params.gamma", "params.kappa", "params.delta_max",
      "params.eta_candidates", "params.epsilon", "params.delta", "params.grid",
      "params.adaptive_enabled", "params.region_aggregation", "params.kappa_grid",
      "params.delta_max_grid", "params.iou_threshold", "params.positive_class",
      "params.eta_tie_tolerance",
      "scenario.seed", "scenario.n_records", "scenario.n_test", "scenario.group1_fraction",
      "scenario.base_accuracy", "scenario.confidence_suppression", "scenario.label_noise",
      "scenario.classes", "scenario.margin_mean", "scenario.margin_sd", "scenario.decision_bias",
      "scenario.boxes_min", "scenario.boxes_max", "scenario.image_size", "scenario.box_min",
      "scenario.box_max", "scenario.detect_prob", "scenario.position_jitter",
      "scenario.size_jitter", "scenario.tp_conf_mean", "scenario.tp_conf_sd", "scenario.fp_rate",
      "scenario.fp_conf_mean", "scenario.fp_conf_sd", "scenario.num_box_classes",
      "sweep.axis", "sweep.values",
  };
  return keys;
}

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

long long non_negative(const Config& cfg, const std::string& key, long long fallback) {
  const long long v = cfg.get_int(key, fallback);
  if (v < 0) config_fail(key + ": must be >= 0");
  return v;
}

HyperParams params_from_config(const Config& cfg) {
  HyperParams p;
  p.alpha = cfg.get_double("params.alpha", p.alpha);
  p.lambda = cfg.get_double("params.lambda", p.lambda);
  p.gamma = cfg.get_double("params.gamma", p.gamma);
  p.kappa = cfg.get_double("params.kappa", p.kappa);
  p.delta_max = cfg.get_double("params.delta_max", p.delta_max);
  p.eta_candidates = cfg.get_doubles("params.eta_candidates", p.eta_candidates);
  p.epsilon = cfg.get_double("params.epsilon", p.epsilon);
  p.delta = cfg.get_double("params.delta", p.delta);
  p.grid = static_cast<int>(cfg.get_int("params.grid", p.grid));
  p.adaptive_enabled = cfg.get_bool("params.adaptive_enabled", p.adaptive_enabled);
  if (const auto agg = cfg.get("params.region_aggregation")) {
    const auto parsed = parse_aggregation(*agg);
    if (!parsed) config_fail("params.region_aggregation: expected sum or max, got '" + *agg + "'");
    p.region_aggregation = *parsed;
  }
  p.kappa_grid = cfg.get_doubles("params.kappa_grid", p.kappa_grid);
  p.delta_max_grid = cfg.get_doubles("params.delta_max_grid", p.delta_max_grid);
  p.iou_threshold = cfg.get_double("params.iou_threshold", p.iou_threshold);
  p.eta_tie_tolerance = cfg.get_double("params.eta_tie_tolerance", p.eta_tie_tolerance);
  p.positive_class =
      static_cast<std::size_t>(non_negative(cfg, "params.positive_class", 1));
  return p;
}

BiasScenario scenario_from_config(const Config& cfg, Task task) {
  BiasScenario s;
  s.task = task;
  s.seed = cfg.get_u64("scenario.seed", s.seed);
  s.n_records = static_cast<std::size_t>(non_negative(cfg, "scenario.n_records",
                                                      static_cast<long long>(s.n_records)));
  s.group1_fraction = cfg.get_double("scenario.group1_fraction", s.group1_fraction);
  s.base_accuracy = cfg.get_double("scenario.base_accuracy", s.base_accuracy);
  s.confidence_suppression =
      cfg.get_double("scenario.confidence_suppression", s.confidence_suppression);
  s.label_noise = cfg.get_double("scenario.label_noise", s.label_noise);
  s.classes = static_cast<std::size_t>(
      non_negative(cfg, "scenario.classes", static_cast<long long>(s.classes)));
  s.margin_mean = cfg.get_double("scenario.margin_mean", s.margin_mean);
  s.margin_sd = cfg.get_double("scenario.margin_sd", s.margin_sd);
  s.decision_bias = cfg.get_double("scenario.decision_bias", s.decision_bias);
  s.boxes_min = static_cast<int>(cfg.get_int("scenario.boxes_min", s.boxes_min));
  s.boxes_max = static_cast<int>(cfg.get_int("scenario.boxes_max", s.boxes_max));
  s.image_size = static_cast<int>(cfg.get_int("scenario.image_size", s.image_size));
  s.box_min = cfg.get_double("scenario.box_min", s.box_min);
  s.box_max = cfg.get_double("scenario.box_max", s.box_max);
  s.detect_prob = cfg.get_double("scenario.detect_prob", s.detect_prob);
  s.position_jitter = cfg.get_double("scenario.position_jitter", s.position_jitter);
  s.size_jitter = cfg.get_double("scenario.size_jitter", s.size_jitter);
  s.tp_conf_mean = cfg.get_double("scenario.tp_conf_mean", s.tp_conf_mean);
  s.tp_conf_sd = cfg.get_double("scenario.tp_conf_sd", s.tp_conf_sd);
  s.fp_rate = cfg.get_double("scenario.fp_rate", s.fp_rate);
  s.fp_conf_mean = cfg.get_double("scenario.fp_conf_mean", s.fp_conf_mean);
  s.fp_conf_sd = cfg.get_double("scenario.fp_conf_sd", s.fp_conf_sd);
  s.num_box_classes =
      static_cast<int>(cfg.get_int("scenario.num_box_classes", s.num_box_classes));
  return s;
}

void require_input(const std::filesystem::path& path, const char* what) {
  if (path == "-") return;
  if (!std::filesystem::exists(path)) {
    config_fail(std::string(what) + " not found: " + path.string());
  }
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoWrite, "cannot create " + dir.string() + ": " + ec.message());
}

void ensure_parent(const std::filesystem::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

Task single_task(std::span<const Record> records, const std::optional<Task>& expected,
                 Task fallback) {
  const Task task = expected ? *expected : (records.empty() ? fallback : task_of(records.front()));
  for (const auto& r : records) {
    if (task_of(r) != task) {
      throw Error(ErrorCode::MixedTask, "record '" + id_of(r) + "' is " +
                                            std::string(to_string(task_of(r))) + ", run is " +
                                            std::string(to_string(task)));
    }
  }
  return task;
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json classification_json(const ClassificationReport& r) {
  Json out;
  out["accuracy"] = r.accuracy;
  out["auc"] = opt_json(r.auc);
  out["dpd"] = r.dpd;
  out["eod"] = opt_json(r.eod);
  out["tpr_g0"] = opt_json(r.tpr_g0);
  out["tpr_g1"] = opt_json(r.tpr_g1);
  out["individual_consistency_rate"] = opt_json(r.individual_consistency_rate);
  out["group_fair"] = r.group_fair;
  out["n_evaluated"] = r.n_evaluated;
  return out;
}

Json detection_json(const DetectionReport& r) {
  Json out;
  out["ap_prot"] = r.ap_prot;
  out["ap_nonprot"] = r.ap_nonprot;
  out["gap"] = r.gap;
  out["mean_iou_g0"] = opt_json(r.mean_iou_by_group.first);
  out["mean_iou_g1"] = opt_json(r.mean_iou_by_group.second);
  out["n_evaluated"] = r.n_evaluated;
  return out;
}

const char* kClassificationColumns =
    "accuracy,auc,dpd,eod,tpr_g0,tpr_g1,individual_consistency_rate,group_fair,n_evaluated";
const char* kDetectionColumns = "ap_prot,ap_nonprot,gap,mean_iou_g0,mean_iou_g1,n_evaluated";

std::string classification_cells(const ClassificationReport& r) {
  return format_number(r.accuracy) + "," + opt(r.auc) + "," + format_number(r.dpd) + "," +
         opt(r.eod) + "," + opt(r.tpr_g0) + "," + opt(r.tpr_g1) + "," +
         opt(r.individual_consistency_rate) + "," + (r.group_fair ? "true" : "false") + "," +
         std::to_string(r.n_evaluated);
}

std::string detection_cells(const DetectionReport& r) {
  return format_number(r.ap_prot) + "," + format_number(r.ap_nonprot) + "," +
         format_number(r.gap) + "," + opt(r.mean_iou_by_group.first) + "," +
         opt(r.mean_iou_by_group.second) + "," + std::to_string(r.n_evaluated);
}

std::string prefixed_columns(const std::string& prefix, std::string columns) {
  std::string out = prefix;
  for (char c : columns) {
    out += c;
    if (c == ',') out += prefix;
  }
  return out;
}

std::string phase_cells(const Evaluation& e, bool after) {
  if (e.task == Task::classification) {
    return classification_cells(after ? *e.classification_after : *e.classification_before);
  }
  return detection_cells(after ? *e.detection_after : *e.detection_before);
}

const char* columns_for(Task task) {
  return task == Task::classification ? kClassificationColumns : kDetectionColumns;
}

std::string threshold_text(const Threshold& q) {
  return q.is_infinite() ? "inf" : format_number(q.value());
}

template <class R>
std::vector<R> typed(std::span<const Record> records) {
  std::vector<R> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(std::get<R>(r));
  return out;
}

void print_artifact_summary(const CalibrationReport& report, std::ostream& log) {
  const auto& a = report.artifact;
  log << "task=" << to_string(a.task) << " n=" << a.n << " rank=" << report.rank
      << " q_alpha=" << threshold_text(a.q_alpha) << '\n';
  if (a.task == Task::classification) {
    log << "selected kappa=" << format_number(a.params.kappa)
        << " delta_max=" << format_number(a.params.delta_max) << '\n';
    log << "kappa,delta_max,dpd,accuracy\n";
    for (const auto& row : report.kappa_search_table) {
      log << format_number(row.kappa) << ',' << format_number(row.delta_max) << ','
          << format_number(row.dpd) << ',' << format_number(row.accuracy) << '\n';
    }
  } else {
    log << "selected eta=" << format_number(a.eta_selected) << '\n';
    log << "eta,gap,mean_ap\n";
    for (const auto& row : report.eta_search_table) {
      log << format_number(row.eta) << ',' << format_number(row.gap) << ','
          << format_number(row.mean_ap) << '\n';
    }
  }
}

Json calibration_report_json(const CalibrationReport& report) {
  Json out;
  out["artifact"] = to_json(report.artifact);
  out["rank"] = report.rank;
  out["violation_budget"] = report.violation_budget;
  Json hist = Json::array();
  for (double s : report.score_histogram) hist.push_back(s);
  out["score_histogram"] = std::move(hist);
  Json eta = Json::array();
  for (const auto& row : report.eta_search_table) {
    eta.push_back(Json{{"eta", row.eta},
                       {"ap_prot", row.ap_prot},
                       {"ap_nonprot", row.ap_nonprot},
                       {"gap", row.gap},
                       {"mean_ap", row.mean_ap}});
  }
  out["eta_search_table"] = std::move(eta);
  Json kappa = Json::array();
  for (const auto& row : report.kappa_search_table) {
    kappa.push_back(Json{{"kappa", row.kappa},
                         {"delta_max", row.delta_max},
                         {"dpd", row.dpd},
                         {"accuracy", row.accuracy}});
  }
  out["kappa_search_table"] = std::move(kappa);
  return out;
}

CalibrationArtifact with_overrides(CalibrationArtifact artifact, const RunConfig& cfg) {
  if (cfg.adaptive_override) artifact.params.adaptive_enabled = *cfg.adaptive_override;
  if (cfg.gamma_override) artifact.params.gamma = *cfg.gamma_override;
  validate(artifact.params);
  return artifact;
}

}  // namespace

RunConfig load_run_config(const Config& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    if (!known_keys().count(key)) config_fail("unknown key '" + key + "'");
  }

  RunConfig run;
  if (const auto t = cfg.get("task")) {
    run.task = parse_task(*t);
    if (!run.task) config_fail("task: expected classification or detection, got '" + *t + "'");
  }
  run.out_dir = cfg.get_string("paths.out", ".");
  run.calibration_path =
      cfg.get_string("paths.calibration", (run.out_dir / "calibration.jsonl").string());
  run.test_path = cfg.get_string("paths.test", (run.out_dir / "test.jsonl").string());
  run.artifact_path = cfg.get_string("paths.artifact", (run.out_dir / "artifact.json").string());
  run.outcomes_path =
      cfg.get_string("paths.outcomes", (run.out_dir / "outcomes.jsonl").string());

  run.params = params_from_config(cfg);
  validate(run.params);
  if (cfg.has("params.adaptive_enabled")) run.adaptive_override = run.params.adaptive_enabled;
  if (cfg.has("params.gamma")) run.gamma_override = run.params.gamma;

  run.scenario = scenario_from_config(cfg, run.task.value_or(Task::classification));
  validate(run.scenario);
  run.n_test = static_cast<std::size_t>(
      non_negative(cfg, "scenario.n_test", static_cast<long long>(run.scenario.n_records)));

  run.sweep_axis = cfg.get_string("sweep.axis", "");
  run.sweep_values = cfg.get_doubles("sweep.values", {});
  return run;
}

std::uint64_t test_seed(std::uint64_t seed) { return seed + 0x9E3779B97F4A7C15ULL; }

ApplyResult apply_records(const CalibrationArtifact& artifact, std::span<const Record> records,
                          EngineMode mode) {
  OnlineEngine engine(artifact, mode);
  ApplyResult result;
  result.outcomes.reserve(records.size());
  for (const auto& r : records) result.outcomes.push_back(engine.process(r));
  result.processed = engine.processed_count();
  result.violations = engine.violation_count();
  result.final_q = engine.current_q();
  return result;
}

std::vector<Record> repaired_records(std::span<const Record> records,
                                     std::span<const RepairOutcome> outcomes) {
  if (records.size() != outcomes.size()) {
    throw Error(ErrorCode::ParseError, "outcomes hold " + std::to_string(outcomes.size()) +
                                           " entries for " + std::to_string(records.size()) +
                                           " test records");
  }
  std::vector<Record> out(records.begin(), records.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (id_of(out[i]) != outcomes[i].id) {
      throw Error(ErrorCode::ParseError, "outcome " + std::to_string(i + 1) + " is for '" +
                                             outcomes[i].id + "', expected '" + id_of(out[i]) +
                                             "'");
    }
    if (auto* c = std::get_if<ClassificationRecord>(&out[i])) {
      c->logits = std::get<std::vector<double>>(outcomes[i].repaired_output);
    } else {
      std::get<DetectionRecord>(out[i]).predictions =
          std::get<std::vector<BoundingBox>>(outcomes[i].repaired_output);
    }
  }
  return out;
}

Evaluation evaluate_pair(std::span<const Record> original, std::span<const Record> repaired,
                         const HyperParams& params) {
  Evaluation e;
  e.task = single_task(original, std::nullopt, Task::classification);
  if (e.task == Task::classification) {
    e.classification_before = evaluate(typed<ClassificationRecord>(original), params);
    e.classification_after = evaluate(typed<ClassificationRecord>(repaired), params);
  } else {
    e.detection_before = evaluate(typed<DetectionRecord>(original), params);
    e.detection_after = evaluate(typed<DetectionRecord>(repaired), params);
  }
  return e;
}

Json report_json(const Evaluation& e) {
  Json out;
  out["task"] = std::string(to_string(e.task));
  if (e.task == Task::classification) {
    out["before"] = classification_json(*e.classification_before);
    out["after"] = classification_json(*e.classification_after);
  } else {
    out["before"] = detection_json(*e.detection_before);
    out["after"] = detection_json(*e.detection_after);
  }
  return out;
}

std::string report_csv(const Evaluation& e) {
  std::string out = std::string("phase,") + columns_for(e.task) + "\n";
  out += "before," + phase_cells(e, false) + "\n";
  out += "after," + phase_cells(e, true) + "\n";
  return out;
}

HyperParams sweep_params(const HyperParams& base, const std::string& axis, double value) {
  HyperParams p = base;
  p.kappa_grid = {p.kappa};
  p.delta_max_grid = {p.delta_max};
  if (axis == "lambda") {
    p.lambda = value;
  } else if (axis == "gamma") {
    p.gamma = value;
    p.adaptive_enabled = true;
  } else if (axis == "eta") {
    p.eta_candidates = {value};
  } else if (axis == "kappa") {
    p.kappa = value;
    p.kappa_grid = {value};
  } else {
    config_fail("sweep.axis: expected lambda, gamma, eta or kappa, got '" + axis + "'");
  }
  validate(p);
  return p;
}

std::vector<SweepRow> run_sweep(std::span<const Record> calibration, std::span<const Record> test,
                                const HyperParams& base, const std::string& axis,
                                std::span<const double> values) {
  if (values.empty()) config_fail("sweep.values: at least one value is required");
  std::vector<SweepRow> rows;
  for (double v : values) {
    const HyperParams p = sweep_params(base, axis, v);
    const CalibrationReport cal = calibrate(calibration, p);
    const ApplyResult applied = apply_records(cal.artifact, test);
    const auto repaired = repaired_records(test, applied.outcomes);
    SweepRow row;
    row.value = v;
    row.q_alpha = cal.artifact.q_alpha;
    row.violation_rate = applied.processed == 0 ? 0.0
                                                : static_cast<double>(applied.violations) /
                                                      static_cast<double>(applied.processed);
    row.evaluation = evaluate_pair(test, repaired, p);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::string& axis, std::span<const SweepRow> rows) {
  const Task task = rows.empty() ? Task::classification : rows.front().evaluation.task;
  const std::string columns = columns_for(task);
  std::string out = axis + ",q_alpha,violation_rate," + prefixed_columns("before_", columns) +
                    "," + prefixed_columns("after_", columns) + "\n";
  for (const auto& row : rows) {
    out += format_number(row.value) + "," + threshold_text(row.q_alpha) + "," +
           format_number(row.violation_rate) + "," + phase_cells(row.evaluation, false) + "," +
           phase_cells(row.evaluation, true) + "\n";
  }
  return out;
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  BiasScenario cal = cfg.scenario;
  BiasScenario test = cfg.scenario;
  test.seed = test_seed(cal.seed);
  test.n_records = cfg.n_test;
  validate(cal);

  const auto cal_records = generate(cal);
  const auto test_records = generate(test);

  for (const auto& [path, records] :
       {std::pair{cfg.calibration_path, &cal_records}, std::pair{cfg.test_path, &test_records}}) {
    ensure_parent(path);
    std::ostringstream buf;
    write_records(buf, *records);
    write_text_file(path, buf.str());
    std::size_t prot = 0;
    for (const auto& r : *records) prot += protected_of(r) == 1;
    log << "wrote " << records->size() << " records to " << path.string()
        << " (protected=" << prot << ", non_protected=" << records->size() - prot << ")\n";
  }
}

void cmd_calibrate(const RunConfig& cfg, std::ostream& log) {
  require_input(cfg.calibration_path, "calibration file");
  const auto records = read_records(cfg.calibration_path);
  if (records.empty()) throw Error(ErrorCode::EmptyCalibration, "calibration set is empty");
  single_task(records, cfg.task, Task::classification);

  const CalibrationReport report = calibrate(records, cfg.params);
  ensure_parent(cfg.artifact_path);
  write_text_file(cfg.artifact_path, to_json(report.artifact).dump(2) + "\n");
  ensure_dir(cfg.out_dir);
  write_text_file(cfg.out_dir / "calibration_report.json",
                  calibration_report_json(report).dump(2) + "\n");
  print_artifact_summary(report, log);
}

void cmd_apply(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& log) {
  require_input(cfg.artifact_path, "artifact");
  require_input(cfg.test_path, "test file");
  const CalibrationArtifact artifact = with_overrides(read_artifact(cfg.artifact_path), cfg);
  if (cfg.task && *cfg.task != artifact.task) {
    throw Error(ErrorCode::TaskMismatch, "run is " + std::string(to_string(*cfg.task)) +
                                             " but the artifact is " +
                                             std::string(to_string(artifact.task)));
  }

  OnlineEngine engine(artifact);
  auto run = [&](std::istream& source, std::ostream& sink) {
    RecordReader reader(source);
    while (auto record = reader.next()) {
      try {
        sink << dump_line(to_json(engine.process(*record))) << '\n';
      } catch (const Error& e) {
        throw Error(e.code(), "line " + std::to_string(reader.line()) + ": " + e.what());
      }
      sink.flush();
    }
  };

  if (cfg.test_path == "-") {
    run(in, out);
  } else {
    std::ifstream source(cfg.test_path);
    if (!source) throw Error(ErrorCode::IoRead, "cannot open " + cfg.test_path.string());
    std::ostringstream buf;
    run(source, buf);
    ensure_parent(cfg.outcomes_path);
    write_text_file(cfg.outcomes_path, buf.str());
  }

  const double rate = engine.processed_count() == 0
                          ? 0.0
                          : static_cast<double>(engine.violation_count()) /
                                static_cast<double>(engine.processed_count());
  log << "processed=" << engine.processed_count() << " violations=" << engine.violation_count()
      << " violation_rate=" << format_number(rate)
      << " initial_q=" << threshold_text(artifact.q_alpha)
      << " final_q=" << threshold_text(engine.current_q()) << '\n';
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  require_input(cfg.test_path, "test file");
  require_input(cfg.outcomes_path, "outcomes file");
  const auto records = read_records(cfg.test_path);
  const Task task = single_task(records, cfg.task, Task::classification);
  const auto outcomes = read_outcomes(cfg.outcomes_path, task);
  const auto repaired = repaired_records(records, outcomes);

  const Evaluation e = evaluate_pair(records, repaired, cfg.params);
  ensure_dir(cfg.out_dir);
  write_text_file(cfg.out_dir / "report.json", report_json(e).dump(2) + "\n");
  const std::string csv = report_csv(e);
  write_text_file(cfg.out_dir / "report.csv", csv);
  log << csv;
}

void cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.sweep_axis.empty()) config_fail("sweep.axis is required");
  for (double v : cfg.sweep_values) sweep_params(cfg.params, cfg.sweep_axis, v);
  require_input(cfg.calibration_path, "calibration file");
  require_input(cfg.test_path, "test file");
  const auto calibration = read_records(cfg.calibration_path);
  const auto test = read_records(cfg.test_path);
  if (calibration.empty()) throw Error(ErrorCode::EmptyCalibration, "calibration set is empty");
  single_task(calibration, cfg.task, Task::classification);
  single_task(test, task_of(calibration.front()), Task::classification);

  const auto rows = run_sweep(calibration, test, cfg.params, cfg.sweep_axis, cfg.sweep_values);
  const std::string csv = sweep_csv(cfg.sweep_axis, rows);
  ensure_dir(cfg.out_dir);
  write_text_file(cfg.out_dir / ("sweep_" + cfg.sweep_axis + ".csv"), csv);
  log << csv;
}

}  // namespace fairsight
