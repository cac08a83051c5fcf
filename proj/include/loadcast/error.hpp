#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadcast {

enum class ErrorCode {
  MalformedRecord,
  InconsistentRedundancy,
  UnknownType,
  InsufficientData,
  SourceExhausted,
  InvalidProfile,
  WindowTooShort,
  FutureTarget,
  EmptyTraining,
  LayoutMismatch,
  InvalidModelSpec,
  AllZeroActuals,
  InsufficientWeeks,
  PoolTooSmall,
  TooFewHouseholds,
  ConfigInvalid,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::InconsistentRedundancy: return "InconsistentRedundancy";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SourceExhausted: return "SourceExhausted";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::FutureTarget: return "FutureTarget";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::InvalidModelSpec: return "InvalidModelSpec";
    case ErrorCode::AllZeroActuals: return "AllZeroActuals";
    case ErrorCode::InsufficientWeeks: return "InsufficientWeeks";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::TooFewHouseholds: return "TooFewHouseholds";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace loadcast
