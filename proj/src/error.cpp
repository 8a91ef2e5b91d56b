#include "uigauge/error.hpp"

namespace uigauge {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingImageFile: return "MissingImageFile";
    case ErrorCode::BoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::StatusMissingOnExpectedResult: return "StatusMissingOnExpectedResult";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OfflineCacheMiss: return "OfflineCacheMiss";
    case ErrorCode::UnknownAnnotationId: return "UnknownAnnotationId";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownRunId: return "UnknownRunId";
    case ErrorCode::TeacherUnparseable: return "TeacherUnparseable";
    case ErrorCode::ConclusionMismatch: return "ConclusionMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace uigauge
