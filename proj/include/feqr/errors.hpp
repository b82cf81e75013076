#pragma once

#include <stdexcept>
#include <string>

namespace feqr {

enum class ErrorCode {
  MissingFile,
  SchemaMismatch,
  MissingCell,
  DuplicateCell,
  NonFiniteValue,
  DuplicateId,
  DimensionMismatch,
  IndexOutOfRange,
  InvalidArgument,
  SingularNormalEquations,
  DidNotConverge,
  DegenerateResiduals,
  ZeroDensity,
  SingularGamma,
  NegativeVariance,
  EmptyCell,
  StudyAborted,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::DidNotConverge: return "DidNotConverge";
    case ErrorCode::DegenerateResiduals: return "DegenerateResiduals";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::SingularGamma: return "SingularGamma";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::StudyAborted: return "StudyAborted";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace feqr
