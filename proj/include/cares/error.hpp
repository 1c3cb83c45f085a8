#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cares {

/// Named failure kinds. Every validation path raises exactly one of these.
enum class ErrorCode {
  // knowledge
  MissingCategory,
  EmptyField,
  InvalidRisk,
  MalformedFile,
  UnknownErrorId,
  // promptgen
  TemplateError,
  // router
  OutOfRangeScore,
  // inference
  EmptyFrames,
  UnparseableResponse,
  BackendUnavailable,
  // data
  MalformedRow,
  InvalidErrorId,
  InvertedSpan,
  BadSampleCount,
  FrameIO,
  // pipeline
  MissingPerspective,
  DuplicatePerspective,
  EvenPanel,
  OrderingViolation,
  // evalx
  LengthMismatch,
  EmptyInput,
  SingleClassLabels,
  MixedTask,
  ScorelessDetections,
  // cli
  ConfigError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cares
