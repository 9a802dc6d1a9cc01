#pragma once

#include <stdexcept>
#include <string>

namespace regen {

enum class ErrorCode {
  DegenerateTau,
  NonPSD,
  HorizonOverflow,
  InsufficientCycles,
  OutOfHorizon,
  NonPositiveTau,
  TooFewSamples,
  UnsupportedLaw,
  InsufficientResolution,
  GridMismatch,
  MissingIntermediate,
  CouplerUnavailable,
  Overflow,
  NotSummable,
  TailTooHeavy,
  SingularSystem,
  OracleDisagreement,
  StateOverflow,
  NoReturn,
  InsufficientDesign,
  InsufficientReplicates,
  ConfigError,
  NumericError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateTau: return "DegenerateTau";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::HorizonOverflow: return "HorizonOverflow";
    case ErrorCode::InsufficientCycles: return "InsufficientCycles";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::NonPositiveTau: return "NonPositiveTau";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::UnsupportedLaw: return "UnsupportedLaw";
    case ErrorCode::InsufficientResolution: return "InsufficientResolution";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MissingIntermediate: return "MissingIntermediate";
    case ErrorCode::CouplerUnavailable: return "CouplerUnavailable";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NotSummable: return "NotSummable";
    case ErrorCode::TailTooHeavy: return "TailTooHeavy";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::OracleDisagreement: return "OracleDisagreement";
    case ErrorCode::StateOverflow: return "StateOverflow";
    case ErrorCode::NoReturn: return "NoReturn";
    case ErrorCode::InsufficientDesign: return "InsufficientDesign";
    case ErrorCode::InsufficientReplicates: return "InsufficientReplicates";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NumericError: return "NumericError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Numerical tolerances shared across modules. Symmetric/PSD checks are
// relative; the pseudo-inverse cutoff is relative to the largest singular
// value.
struct Tolerances {
  double sym_rel = 1e-9;
  double psd_rel = 1e-9;
  double pinv_cutoff_rel = 1e-12;
  double identity_abs = 1e-10;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace regen
