#pragma once

#include <stdexcept>
#include <string>

namespace uigauge {

// Every failure the library reports carries a machine-readable code so the
// CLI can map it to an exit status without string matching.
enum class ErrorCode {
  // dataset
  MissingImageFile,
  BoxOutOfBounds,
  DuplicateId,
  StatusMissingOnExpectedResult,
  MalformedRecord,
  // templates
  MissingBinding,
  UnknownPlaceholder,
  NotApplicable,
  // inference
  Timeout,
  AuthFailure,
  RateLimited,
  BackendError,
  DimensionMismatch,
  OfflineCacheMiss,
  // evaluator
  UnknownAnnotationId,
  UnknownCategory,
  EmptyInput,
  UnknownRunId,
  // pipeline
  TeacherUnparseable,
  ConclusionMismatch,
  // analysis
  DegenerateInput,
  // generic
  IoError,
  ConfigError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uigauge
