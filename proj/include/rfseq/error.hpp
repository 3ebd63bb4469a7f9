#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfseq {

enum class Errc {
  BadMagic,
  Truncated,
  DegenerateProfile,
  InvalidArgument,
  StuffingViolation,
  Overrun,
  SignalTooShort,
  TooShort,
  OutOfBounds,
  MisalignedStart,
  InsufficientData,
  SchemaMismatch,
  CorruptLength,
  ShapeMismatch,
  Diverged,
  InsufficientClasses,
  Io,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::Truncated: return "Truncated";
    case Errc::DegenerateProfile: return "DegenerateProfile";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::StuffingViolation: return "StuffingViolation";
    case Errc::Overrun: return "Overrun";
    case Errc::SignalTooShort: return "SignalTooShort";
    case Errc::TooShort: return "TooShort";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::MisalignedStart: return "MisalignedStart";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::CorruptLength: return "CorruptLength";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::Diverged: return "Diverged";
    case Errc::InsufficientClasses: return "InsufficientClasses";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries an error code so callers
/// (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace rfseq
