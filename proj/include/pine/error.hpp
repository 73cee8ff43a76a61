#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pine {

enum class Errc {
  ParseError,
  EmptyDataset,
  InconsistentColumnCount,
  TooFewRows,
  InvalidArgument,
  DimensionMismatch,
  DegenerateLabels,
  SchemaError,
  IoError,
  Unbounded,
  MalformedModel,
  NoThresholds,
  DegenerateGrid,
  TooFewSamples,
  EmptyCalibrationSet,
  AlphaOutOfRange,
  InfeasibleAtEpsilon,
  SolverUncertified,
  TooManyCells,
  EmptyTestSet,
  Inconsistent,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InconsistentColumnCount: return "InconsistentColumnCount";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::SchemaError: return "SchemaError";
    case Errc::IoError: return "IoError";
    case Errc::Unbounded: return "Unbounded";
    case Errc::MalformedModel: return "MalformedModel";
    case Errc::NoThresholds: return "NoThresholds";
    case Errc::DegenerateGrid: return "DegenerateGrid";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case Errc::AlphaOutOfRange: return "AlphaOutOfRange";
    case Errc::InfeasibleAtEpsilon: return "InfeasibleAtEpsilon";
    case Errc::SolverUncertified: return "SolverUncertified";
    case Errc::TooManyCells: return "TooManyCells";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::Inconsistent: return "Inconsistent";
  }
  return "Unknown";
}

/// Domain error carrying a stable error name, e.g. "ParseError: row 3, column 2 is empty".
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

}  // namespace pine
