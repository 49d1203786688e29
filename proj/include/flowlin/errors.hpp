#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowlin {

enum class Errc {
  InvalidArgument,
  RangeError,
  PositiveSpectrum,
  NonSemisimpleCenter,
  DimensionTooLarge,
  TimeOutOfDomain,
  IntegrationFailure,
  UnknownEntry,
  MissingAction,
  MissingEmbedding,
  EmptyAttractor,
  OnAttractor,
  BracketFailure,
  PhaseMapInvalid,
  PreconditionFailed,
  ConditionThreeViolated,
  InconsistentFacts,
  DimensionMismatch,
  ZeroOnCircle,
  NotInFamily,
  RankDeficient,
  ParseError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RangeError: return "RangeError";
    case Errc::PositiveSpectrum: return "PositiveSpectrum";
    case Errc::NonSemisimpleCenter: return "NonSemisimpleCenter";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::TimeOutOfDomain: return "TimeOutOfDomain";
    case Errc::IntegrationFailure: return "IntegrationFailure";
    case Errc::UnknownEntry: return "UnknownEntry";
    case Errc::MissingAction: return "MissingAction";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::EmptyAttractor: return "EmptyAttractor";
    case Errc::OnAttractor: return "OnAttractor";
    case Errc::BracketFailure: return "BracketFailure";
    case Errc::PhaseMapInvalid: return "PhaseMapInvalid";
    case Errc::PreconditionFailed: return "PreconditionFailed";
    case Errc::ConditionThreeViolated: return "ConditionThreeViolated";
    case Errc::InconsistentFacts: return "InconsistentFacts";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroOnCircle: return "ZeroOnCircle";
    case Errc::NotInFamily: return "NotInFamily";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace flowlin
