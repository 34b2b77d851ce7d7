#include "fairsight/error.hpp"
#include "fairsight/types.hpp"

namespace fairsight {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteValue: return "NON_FINITE_VALUE";
    case ErrorCode::LabelOutOfRange: return "LABEL_OUT_OF_RANGE";
    case ErrorCode::EmptyLogits: return "EMPTY_LOGITS";
    case ErrorCode::NegativeExtent: return "NEGATIVE_EXTENT";
    case ErrorCode::ConfidenceOutOfRange: return "CONFIDENCE_OUT_OF_RANGE";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::InvalidProtectedAttribute: return "INVALID_PROTECTED_ATTRIBUTE";
    case ErrorCode::UndefinedGroupMean: return "UNDEFINED_GROUP_MEAN";
    case ErrorCode::EmptyCalibration: return "EMPTY_CALIBRATION";
    case ErrorCode::MixedTask: return "MIXED_TASK";
    case ErrorCode::TaskMismatch: return "TASK_MISMATCH";
    case ErrorCode::EmptyGroup: return "EMPTY_GROUP";
    case ErrorCode::UndefinedRate: return "UNDEFINED_RATE";
    case ErrorCode::NoCounterfactuals: return "NO_COUNTERFACTUALS";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::IoWrite: return "IO_WRITE";
    case ErrorCode::IoRead: return "IO_READ";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
  }
  return "UNKNOWN";
}

bool is_config_error(ErrorCode code) noexcept { return code == ErrorCode::ConfigError; }

std::string_view to_string(Task task) noexcept {
  return task == Task::classification ? "classification" : "detection";
}

std::optional<Task> parse_task(std::string_view text) noexcept {
  if (text == "classification") return Task::classification;
  if (text == "detection") return Task::detection;
  return std::nullopt;
}

std::string_view to_string(RegionAggregation agg) noexcept {
  return agg == RegionAggregation::sum ? "sum" : "max";
}

std::optional<RegionAggregation> parse_aggregation(std::string_view text) noexcept {
  if (text == "sum") return RegionAggregation::sum;
  if (text == "max") return RegionAggregation::max;
  return std::nullopt;
}

Task task_of(const Record& record) noexcept {
  return std::holds_alternative<ClassificationRecord>(record) ? Task::classification
                                                              : Task::detection;
}

const std::string& id_of(const Record& record) noexcept {
  return std::visit([](const auto& r) -> const std::string& { return r.id; }, record);
}

int protected_of(const Record& record) noexcept {
  return std::visit([](const auto& r) { return r.protected_attr; }, record);
}

}  // namespace fairsight
