#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phonotrack {

/// Every failure the toolkit reports maps onto one of these codes.
enum class ErrorCode {
  InvalidInput,
  DegenerateSignal,
  UnsupportedRatio,
  TooShort,
  InvalidCutoff,
  FileNotFound,
  UnsupportedEncoding,
  ZeroLengthData,
  MalformedFile,
  ParseError,
  NonMonotoneTime,
  InsufficientEvents,
  DecompositionDepth,
  InvalidGrid,
  ContractViolation,
  InsufficientPeaks,
  InsufficientCycles,
  InvalidSegmentation,
  NumericOverflow,
  RankDeficient,
  InsufficientData,
  NoValidFrames,
  UndefinedNormalizer,
  DegenerateCoverage,
  UndefinedCorrelation,
  LengthMismatch,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::DegenerateSignal: return "degenerate-signal";
    case ErrorCode::UnsupportedRatio: return "unsupported-ratio";
    case ErrorCode::TooShort: return "too-short";
    case ErrorCode::InvalidCutoff: return "invalid-cutoff";
    case ErrorCode::FileNotFound: return "file-not-found";
    case ErrorCode::UnsupportedEncoding: return "unsupported-encoding";
    case ErrorCode::ZeroLengthData: return "zero-length-data";
    case ErrorCode::MalformedFile: return "malformed-file";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::NonMonotoneTime: return "non-monotone-time";
    case ErrorCode::InsufficientEvents: return "insufficient-events";
    case ErrorCode::DecompositionDepth: return "decomposition-depth";
    case ErrorCode::InvalidGrid: return "invalid-grid";
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::InsufficientPeaks: return "insufficient-peaks";
    case ErrorCode::InsufficientCycles: return "insufficient-cycles";
    case ErrorCode::InvalidSegmentation: return "invalid-segmentation";
    case ErrorCode::NumericOverflow: return "numeric-overflow";
    case ErrorCode::RankDeficient: return "rank-deficient";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::NoValidFrames: return "no-valid-frames";
    case ErrorCode::UndefinedNormalizer: return "undefined-normalizer";
    case ErrorCode::DegenerateCoverage: return "degenerate-coverage";
    case ErrorCode::UndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::ConfigError: return "config-error";
  }
  return "unknown";
}

/// Exception carrying a machine-readable code and, once it has passed
/// through a pipeline, the name of the stage that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Copy tagged with `stage`; an existing (inner) tag is kept.
  Error with_stage(std::string stage) const {
    return Error(code_, what(), stage_.empty() ? std::move(stage) : stage_);
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace phonotrack
