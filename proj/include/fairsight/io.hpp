#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsight/repair.hpp"
#include "fairsight/types.hpp"

namespace fairsight {

using Json = nlohmann::ordered_json;

// Parses one JSONL object into a validated record. The task is inferred from
// the keys present ("logits" or "predictions"). `line` only feeds messages.
Record parse_record(const nlohmann::json& object, std::size_t line);
Record parse_record_line(const std::string& text, std::size_t line);

Json to_json(const Record& record);
Json to_json(const BoundingBox& box);

// Line-oriented reader; blank lines are skipped but still counted.
class RecordReader {
 public:
  explicit RecordReader(std::istream& in) : in_(in) {}

  std::optional<Record> next();
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<Record> read_records(std::istream& in);
std::vector<Record> read_records(const std::filesystem::path& path);

void write_records(std::ostream& out, std::span<const Record> records);

// Compact single-line rendering with shortest round-trip doubles.
std::string dump_line(const Json& value);

/// Number, or the string "inf" for an infinite threshold.
Json to_json(const Threshold& threshold);
Threshold threshold_from_json(const nlohmann::json& value);

Json to_json(const HyperParams& params);
HyperParams params_from_json(const nlohmann::json& value);

Json to_json(const CalibrationArtifact& artifact);
CalibrationArtifact artifact_from_json(const nlohmann::json& value);
CalibrationArtifact read_artifact(const std::filesystem::path& path);

Json to_json(const RepairOutcome& outcome);
RepairOutcome outcome_from_json(const nlohmann::json& value, Task task, std::size_t line);
std::vector<RepairOutcome> read_outcomes(const std::filesystem::path& path, Task task);

/// Shortest round-trip text of a double, as used in every output file.
std::string format_number(double value);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace fairsight
