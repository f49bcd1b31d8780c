#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uopf {

enum class ErrorCode {
  MissingTable,
  MalformedRow,
  DanglingReference,
  MultipleSlack,
  NoSlack,
  Disconnected,
  InvalidCase,
  ZeroImpedanceBranch,
  CannotReachTarget,
  DimensionMismatch,
  SingularJacobian,
  MaxIterationsExceeded,
  TooFewLabeled,
  UnfittedDimension,
  InvalidSlotMap,
  LengthMismatch,
  ShapeMismatch,
  EmptyTrainSet,
  CorruptFile,
  VersionMismatch,
  MissingLabel,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingTable: return "MissingTable";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::MultipleSlack: return "MultipleSlack";
    case ErrorCode::NoSlack: return "NoSlack";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::InvalidCase: return "InvalidCase";
    case ErrorCode::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorCode::CannotReachTarget: return "CannotReachTarget";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::TooFewLabeled: return "TooFewLabeled";
    case ErrorCode::UnfittedDimension: return "UnfittedDimension";
    case ErrorCode::InvalidSlotMap: return "InvalidSlotMap";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
/// `what()` is "<Code>: <detail>" so the CLI can print it as-is.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uopf
