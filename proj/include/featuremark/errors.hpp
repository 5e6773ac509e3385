// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace featuremark {

enum class Errc {
  invalid_argument,
  empty_input,
  length_mismatch,
  empty_unit,
  all_masked,
  zero_mass,
  too_few_units,
  degenerate_distribution,
  io_error,
  version_mismatch,
  corrupt_model,
  calibration_mismatch,
  bits_out_of_range,
  space_too_large,
  generator_unavailable,
  all_candidates_unscoreable,
  degenerate_targets,
  target_unreachable,
  empty_lexicon,
  config_invalid,
  protocol_error,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::empty_input: return "EmptyInput";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_unit: return "EmptyUnit";
    case Errc::all_masked: return "AllMasked";
    case Errc::zero_mass: return "ZeroMass";
    case Errc::too_few_units: return "TooFewUnits";
    case Errc::degenerate_distribution: return "DegenerateDistribution";
    case Errc::io_error: return "IoError";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::corrupt_model: return "CorruptModel";
    case Errc::calibration_mismatch: return "CalibrationMismatch";
    case Errc::bits_out_of_range: return "BitsOutOfRange";
    case Errc::space_too_large: return "SpaceTooLarge";
    case Errc::generator_unavailable: return "GeneratorUnavailable";
    case Errc::all_candidates_unscoreable: return "AllCandidatesUnscoreable";
    case Errc::degenerate_targets: return "DegenerateTargets";
    case Errc::target_unreachable: return "TargetUnreachable";
    case Errc::empty_lexicon: return "EmptyLexicon";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::protocol_error: return "ProtocolError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the `Errc` codes so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool condition, Errc code, const char* what) {
  if (!condition) throw Error(code, what);
}

}  // namespace featuremark
