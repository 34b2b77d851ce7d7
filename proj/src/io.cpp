#include "fairsight/io.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fairsight/error.hpp"
#include "fairsight/validate.hpp"

namespace fairsight {
namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(line, std::string("missing required key '") + key + "'");
  return *it;
}

double number(const json& v, const char* key, std::size_t line) {
  if (!v.is_number()) parse_fail(line, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

long long integer(const json& v, const char* key, std::size_t line) {
  if (!v.is_number_integer()) parse_fail(line, std::string("'") + key + "' must be an integer");
  return v.get<long long>();
}

std::vector<double> number_array(const json& v, const char* key, std::size_t line) {
  if (!v.is_array()) parse_fail(line, std::string("'") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(number(x, key, line));
  return out;
}

int protected_value(const json& obj, std::size_t line) {
  const long long a = integer(require(obj, "protected", line), "protected", line);
  if (a < std::numeric_limits<int>::min() || a > std::numeric_limits<int>::max()) return -1;
  return static_cast<int>(a);
}

std::string record_id(const json& obj, std::size_t line) {
  const json& v = require(obj, "id", line);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  parse_fail(line, "'id' must be a string");
}

BoundingBox parse_box(const json& v, bool prediction, std::size_t line) {
  if (!v.is_object()) parse_fail(line, "box entries must be objects");
  BoundingBox b;
  b.x = number(require(v, "x", line), "x", line);
  b.y = number(require(v, "y", line), "y", line);
  b.w = number(require(v, "w", line), "w", line);
  b.h = number(require(v, "h", line), "h", line);
  b.class_id = static_cast<int>(integer(require(v, "class_id", line), "class_id", line));
  if (prediction) b.confidence = number(require(v, "confidence", line), "confidence", line);
  return b;
}

std::vector<BoundingBox> parse_boxes(const json& v, const char* key, bool prediction,
                                     std::size_t line) {
  if (!v.is_array()) parse_fail(line, std::string("'") + key + "' must be an array");
  std::vector<BoundingBox> out;
  out.reserve(v.size());
  for (const auto& b : v) out.push_back(parse_box(b, prediction, line));
  return out;
}

template <class R>
R validated(R record, std::size_t line) {
  try {
    return validate(std::move(record));
  } catch (const Error& e) {
    throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what());
  }
}

Json number_list(const std::vector<double>& values) {
  Json out = Json::array();
  for (double v : values) out.push_back(v);
  return out;
}

Json boxes_json(const std::vector<BoundingBox>& boxes) {
  Json out = Json::array();
  for (const auto& b : boxes) out.push_back(to_json(b));
  return out;
}

Json output_json(const ModelOutput& output) {
  if (const auto* logits = std::get_if<std::vector<double>>(&output)) return number_list(*logits);
  return boxes_json(std::get<std::vector<BoundingBox>>(output));
}

std::vector<double> double_list(const json& v, const char* key) {
  std::vector<double> out;
  for (const auto& x : v.at(key)) out.push_back(x.get<double>());
  return out;
}

std::optional<double> optional_number(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

Record parse_record(const json& obj, std::size_t line) {
  if (!obj.is_object()) parse_fail(line, "record must be a JSON object");

  if (obj.contains("logits")) {
    ClassificationRecord r;
    r.id = record_id(obj, line);
    r.logits = number_array(obj.at("logits"), "logits", line);
    const long long label = integer(require(obj, "ref_label", line), "ref_label", line);
    if (label < 0) {
      throw Error(ErrorCode::LabelOutOfRange, "line " + std::to_string(line) + ": record '" +
                                                  r.id + "': ref_label is negative");
    }
    r.ref_label = static_cast<std::size_t>(label);
    r.protected_attr = protected_value(obj, line);
    if (const auto it = obj.find("counterfactual_logits"); it != obj.end() && !it->is_null()) {
      r.counterfactual_logits = number_array(*it, "counterfactual_logits", line);
    }
    return validated(std::move(r), line);
  }

  if (obj.contains("predictions") || obj.contains("ground_truth")) {
    DetectionRecord r;
    r.id = record_id(obj, line);
    r.protected_attr = protected_value(obj, line);
    r.image_w = static_cast<int>(integer(require(obj, "image_w", line), "image_w", line));
    r.image_h = static_cast<int>(integer(require(obj, "image_h", line), "image_h", line));
    r.predictions = parse_boxes(require(obj, "predictions", line), "predictions", true, line);
    r.ground_truth = parse_boxes(require(obj, "ground_truth", line), "ground_truth", false, line);
    return validated(std::move(r), line);
  }

  parse_fail(line, "record has neither 'logits' nor 'predictions'");
}

Record parse_record_line(const std::string& text, std::size_t line) {
  json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded()) parse_fail(line, "malformed JSON");
  return parse_record(obj, line);
}

Json to_json(const BoundingBox& box) {
  Json out;
  out["x"] = box.x;
  out["y"] = box.y;
  out["w"] = box.w;
  out["h"] = box.h;
  if (box.confidence) out["confidence"] = *box.confidence;
  out["class_id"] = box.class_id;
  return out;
}

Json to_json(const Record& record) {
  Json out;
  if (const auto* c = std::get_if<ClassificationRecord>(&record)) {
    out["id"] = c->id;
    out["logits"] = number_list(c->logits);
    out["ref_label"] = c->ref_label;
    out["protected"] = c->protected_attr;
    if (c->counterfactual_logits) {
      out["counterfactual_logits"] = number_list(*c->counterfactual_logits);
    }
    return out;
  }
  const auto& d = std::get<DetectionRecord>(record);
  out["id"] = d.id;
  out["protected"] = d.protected_attr;
  out["image_w"] = d.image_w;
  out["image_h"] = d.image_h;
  out["predictions"] = boxes_json(d.predictions);
  out["ground_truth"] = boxes_json(d.ground_truth);
  return out;
}

std::optional<Record> RecordReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    return parse_record_line(text, line_);
  }
  if (in_.bad()) throw Error(ErrorCode::IoRead, "read failed after line " + std::to_string(line_));
  return std::nullopt;
}

std::vector<Record> read_records(std::istream& in) {
  RecordReader reader(in);
  std::vector<Record> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<Record> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoRead, "cannot open " + path.string());
  try {
    return read_records(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string dump_line(const Json& value) { return value.dump(); }

void write_records(std::ostream& out, std::span<const Record> records) {
  for (const auto& r : records) out << dump_line(to_json(r)) << '\n';
}

std::string format_number(double value) { return Json(value).dump(); }

Json to_json(const Threshold& threshold) {
  if (threshold.is_infinite()) return "inf";
  return threshold.value();
}

Threshold threshold_from_json(const json& value) {
  if (value.is_string() && value.get<std::string>() == "inf") return Threshold::infinite();
  if (!value.is_number()) throw Error(ErrorCode::ParseError, "threshold must be a number or \"inf\"");
  return Threshold::finite(value.get<double>());
}

Json to_json(const HyperParams& p) {
  Json out;
  out["alpha"] = p.alpha;
  out["lambda"] = p.lambda;
  out["gamma"] = p.gamma;
  out["kappa"] = p.kappa;
  out["delta_max"] = p.delta_max;
  out["eta_candidates"] = number_list(p.eta_candidates);
  out["epsilon"] = p.epsilon;
  out["delta"] = p.delta;
  out["grid"] = p.grid;
  out["adaptive_enabled"] = p.adaptive_enabled;
  out["region_aggregation"] = std::string(to_string(p.region_aggregation));
  out["kappa_grid"] = number_list(p.kappa_grid);
  out["delta_max_grid"] = number_list(p.delta_max_grid);
  out["iou_threshold"] = p.iou_threshold;
  out["positive_class"] = p.positive_class;
  out["eta_tie_tolerance"] = p.eta_tie_tolerance;
  return out;
}

HyperParams params_from_json(const json& v) {
  HyperParams p;
  p.alpha = v.at("alpha").get<double>();
  p.lambda = v.at("lambda").get<double>();
  p.gamma = v.at("gamma").get<double>();
  p.kappa = v.at("kappa").get<double>();
  p.delta_max = v.at("delta_max").get<double>();
  p.eta_candidates = double_list(v, "eta_candidates");
  p.epsilon = v.at("epsilon").get<double>();
  p.delta = v.at("delta").get<double>();
  p.grid = v.at("grid").get<int>();
  p.adaptive_enabled = v.at("adaptive_enabled").get<bool>();
  const auto agg = parse_aggregation(v.at("region_aggregation").get<std::string>());
  if (!agg) throw Error(ErrorCode::ParseError, "unknown region_aggregation");
  p.region_aggregation = *agg;
  p.kappa_grid = double_list(v, "kappa_grid");
  p.delta_max_grid = double_list(v, "delta_max_grid");
  p.iou_threshold = v.at("iou_threshold").get<double>();
  p.positive_class = v.at("positive_class").get<std::size_t>();
  p.eta_tie_tolerance = v.at("eta_tie_tolerance").get<double>();
  return p;
}

Json to_json(const CalibrationArtifact& a) {
  Json out;
  out["task"] = std::string(to_string(a.task));
  out["q_alpha"] = to_json(a.q_alpha);
  if (a.region_q) {
    Json rows = Json::array();
    for (int r = 0; r < a.region_q->size(); ++r) {
      Json row = Json::array();
      for (int c = 0; c < a.region_q->size(); ++c) row.push_back(to_json(a.region_q->at(r, c)));
      rows.push_back(std::move(row));
    }
    out["region_q"] = std::move(rows);
  } else {
    out["region_q"] = nullptr;
  }
  Json stats;
  stats["mean_conf_g0"] = a.stats.mean_conf_g0 ? Json(*a.stats.mean_conf_g0) : Json(nullptr);
  stats["mean_conf_g1"] = a.stats.mean_conf_g1 ? Json(*a.stats.mean_conf_g1) : Json(nullptr);
  stats["count_g0"] = a.stats.count_g0;
  stats["count_g1"] = a.stats.count_g1;
  out["group_stats"] = std::move(stats);
  out["params"] = to_json(a.params);
  out["n"] = a.n;
  out["eta_selected"] = a.eta_selected;
  return out;
}

CalibrationArtifact artifact_from_json(const json& v) {
  try {
    CalibrationArtifact a;
    const auto task = parse_task(v.at("task").get<std::string>());
    if (!task) throw Error(ErrorCode::ParseError, "artifact: unknown task");
    a.task = *task;
    a.q_alpha = threshold_from_json(v.at("q_alpha"));
    const json& rq = v.at("region_q");
    if (!rq.is_null()) {
      const int g = static_cast<int>(rq.size());
      Grid<Threshold> grid(g, Threshold::infinite());
      for (int r = 0; r < g; ++r) {
        if (rq.at(r).size() != rq.size()) {
          throw Error(ErrorCode::ParseError, "artifact: region_q must be square");
        }
        for (int c = 0; c < g; ++c) grid.at(r, c) = threshold_from_json(rq.at(r).at(c));
      }
      a.region_q = std::move(grid);
    }
    const json& s = v.at("group_stats");
    a.stats.mean_conf_g0 = optional_number(s.at("mean_conf_g0"));
    a.stats.mean_conf_g1 = optional_number(s.at("mean_conf_g1"));
    a.stats.count_g0 = s.at("count_g0").get<std::size_t>();
    a.stats.count_g1 = s.at("count_g1").get<std::size_t>();
    a.params = params_from_json(v.at("params"));
    a.n = v.at("n").get<std::size_t>();
    a.eta_selected = v.at("eta_selected").get<double>();
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("artifact: ") + e.what());
  }
}

CalibrationArtifact read_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoRead, "cannot open " + path.string());
  json v = json::parse(in, nullptr, false);
  if (v.is_discarded()) throw Error(ErrorCode::ParseError, path.string() + ": malformed JSON");
  return artifact_from_json(v);
}

Json to_json(const RepairOutcome& o) {
  Json out;
  out["id"] = o.id;
  out["score"] = o.score ? Json(*o.score) : Json(nullptr);
  out["threshold_before"] = to_json(o.threshold_before);
  out["repaired"] = o.repaired;
  out["original_output"] = output_json(o.original_output);
  out["repaired_output"] = output_json(o.repaired_output);
  out["threshold_after"] = to_json(o.threshold_after);
  if (o.violated_regions) {
    Json regions = Json::array();
    for (const auto& r : *o.violated_regions) regions.push_back(Json::array({r.row, r.col}));
    out["violated_regions"] = std::move(regions);
  }
  return out;
}

RepairOutcome outcome_from_json(const json& v, Task task, std::size_t line) {
  try {
    RepairOutcome o;
    o.id = v.at("id").get<std::string>();
    o.score = optional_number(v.at("score"));
    o.threshold_before = threshold_from_json(v.at("threshold_before"));
    o.repaired = v.at("repaired").get<bool>();
    o.threshold_after = threshold_from_json(v.at("threshold_after"));
    if (task == Task::classification) {
      o.original_output = double_list(v, "original_output");
      o.repaired_output = double_list(v, "repaired_output");
    } else {
      o.original_output = parse_boxes(v.at("original_output"), "original_output", true, line);
      o.repaired_output = parse_boxes(v.at("repaired_output"), "repaired_output", true, line);
      std::vector<RegionIndex> regions;
      for (const auto& r : v.at("violated_regions")) {
        regions.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
      }
      o.violated_regions = std::move(regions);
    }
    return o;
  } catch (const json::exception& e) {
    parse_fail(line, std::string("outcome: ") + e.what());
  }
}

std::vector<RepairOutcome> read_outcomes(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoRead, "cannot open " + path.string());
  std::vector<RepairOutcome> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) parse_fail(line, path.string() + ": malformed JSON");
    out.push_back(outcome_from_json(v, task, line));
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoWrite, "cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw Error(ErrorCode::IoWrite, "write failed: " + path.string());
}

}  // namespace fairsight
