#include "cares/error.hpp"

namespace cares {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingCategory: return "MissingCategory";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::InvalidRisk: return "InvalidRisk";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnknownErrorId: return "UnknownErrorId";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::OutOfRangeScore: return "OutOfRangeScore";
    case ErrorCode::EmptyFrames: return "EmptyFrames";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::InvalidErrorId: return "InvalidErrorId";
    case ErrorCode::InvertedSpan: return "InvertedSpan";
    case ErrorCode::BadSampleCount: return "BadSampleCount";
    case ErrorCode::FrameIO: return "FrameIO";
    case ErrorCode::MissingPerspective: return "MissingPerspective";
    case ErrorCode::DuplicatePerspective: return "DuplicatePerspective";
    case ErrorCode::EvenPanel: return "EvenPanel";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SingleClassLabels: return "SingleClassLabels";
    case ErrorCode::MixedTask: return "MixedTask";
    case ErrorCode::ScorelessDetections: return "ScorelessDetections";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace cares
