#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hamos {

enum class ErrorKind {
  ZeroVector,
  BadClass,
  NotUnit,
  InsufficientData,
  BadArg,
  AntipodalPrototypes,
  DegenerateDensity,
  EmptyBuffer,
  TooFewSamples,
  UndefinedPrototype,
  BadConfig,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::BadClass: return "BadClass";
    case ErrorKind::NotUnit: return "NotUnit";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::BadArg: return "BadArg";
    case ErrorKind::AntipodalPrototypes: return "AntipodalPrototypes";
    case ErrorKind::DegenerateDensity: return "DegenerateDensity";
    case ErrorKind::EmptyBuffer: return "EmptyBuffer";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::UndefinedPrototype: return "UndefinedPrototype";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to a recovery action or an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hamos
