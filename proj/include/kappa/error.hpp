#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kappa {

/// Failure categories surfaced by the library. The CLI prints the name of the
/// code together with the message.
enum class Errc {
  InsufficientData,
  FormatError,
  DimensionMismatch,
  IoError,
  InvalidArgument,
  RankDeficient,
  NumericalFailure,
  DegenerateSignal,
  SingularUnmixing,
  DipoleOutsideBrain,
  SeriesNotConverged,
  ZeroTopography,
  EmptyInput,
  ConfigError,
  EmptyGroup,
  MissingReference,
  DegenerateX,
  NonpositiveX,
  DegenerateInput,
  DegenerateMatrix,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::FormatError: return "FormatError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::DegenerateSignal: return "DegenerateSignal";
    case Errc::SingularUnmixing: return "SingularUnmixing";
    case Errc::DipoleOutsideBrain: return "DipoleOutsideBrain";
    case Errc::SeriesNotConverged: return "SeriesNotConverged";
    case Errc::ZeroTopography: return "ZeroTopography";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ConfigError: return "ConfigError";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::MissingReference: return "MissingReference";
    case Errc::DegenerateX: return "DegenerateX";
    case Errc::NonpositiveX: return "NonpositiveX";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::DegenerateMatrix: return "DegenerateMatrix";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, Errc code, const char* what) {
  if (!condition) throw Error(code, what);
}

}  // namespace kappa
