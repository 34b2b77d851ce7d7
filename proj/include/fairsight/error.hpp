#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairsight {

enum class ErrorCode {
  NonFiniteValue,
  LabelOutOfRange,
  EmptyLogits,
  NegativeExtent,
  ConfidenceOutOfRange,
  LengthMismatch,
  InvalidProtectedAttribute,
  UndefinedGroupMean,
  EmptyCalibration,
  MixedTask,
  TaskMismatch,
  EmptyGroup,
  UndefinedRate,
  NoCounterfactuals,
  ParseError,
  IoWrite,
  IoRead,
  ConfigError,
};

/// Stable machine-readable name, e.g. "NON_FINITE_VALUE".
std::string_view to_string(ErrorCode code) noexcept;

/// Configuration problems map to exit code 2, everything else to 3.
bool is_config_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fairsight
