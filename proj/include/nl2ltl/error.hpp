#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nl2ltl {

enum class Errc {
  UnbalancedParens,
  UnknownToken,
  ArityViolation,
  BackendUnavailable,
  ProfileMiss,
  EmptySequence,
  LengthMismatch,
  MixedFingerprints,
  ConfigFingerprintMismatch,
  NotAwaitingHelp,
  UnknownCandidate,
  DuplicateForSession,
  AlreadyResolved,
  InvalidTypedResponse,
  TypeInNotAllowed,
  UnknownEntry,
  UnknownSession,
  InsufficientCorpus,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::UnbalancedParens: return "UnbalancedParens";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::ArityViolation: return "ArityViolation";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ProfileMiss: return "ProfileMiss";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::MixedFingerprints: return "MixedFingerprints";
    case Errc::ConfigFingerprintMismatch: return "ConfigFingerprintMismatch";
    case Errc::NotAwaitingHelp: return "NotAwaitingHelp";
    case Errc::UnknownCandidate: return "UnknownCandidate";
    case Errc::DuplicateForSession: return "DuplicateForSession";
    case Errc::AlreadyResolved: return "AlreadyResolved";
    case Errc::InvalidTypedResponse: return "InvalidTypedResponse";
    case Errc::TypeInNotAllowed: return "TypeInNotAllowed";
    case Errc::UnknownEntry: return "UnknownEntry";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::InsufficientCorpus: return "InsufficientCorpus";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace nl2ltl
