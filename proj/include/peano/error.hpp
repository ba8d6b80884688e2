#pragma once

#include <stdexcept>
#include <string>

namespace peano {

enum class ErrorKind {
  InvalidArgument,
  SingularPoint,
  ProfileInvalid,
  GridTooLarge,
  NonConvergence,
  Bracket,
  IntegrationFailure,
  UnreachableDirection,
  InsufficientSamples,
  OutOfRange,
  OutOfGrid,
  FitFailure,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::SingularPoint: return "singular point";
    case ErrorKind::ProfileInvalid: return "invalid profile";
    case ErrorKind::GridTooLarge: return "grid too large";
    case ErrorKind::NonConvergence: return "no convergence";
    case ErrorKind::Bracket: return "bad bracket";
    case ErrorKind::IntegrationFailure: return "integration failure";
    case ErrorKind::UnreachableDirection: return "unreachable direction";
    case ErrorKind::InsufficientSamples: return "insufficient samples";
    case ErrorKind::OutOfRange: return "out of range";
    case ErrorKind::OutOfGrid: return "out of grid";
    case ErrorKind::FitFailure: return "fit failure";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace peano
