#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sigmaforge {

enum class ErrorKind {
  InvalidInput,
  InsufficientData,
  Degenerate,
  NonFinite,
  Shape,
  SingularDesign,
  OptimizationFailed,
  TrainingDiverged,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Degenerate: return "degenerate series";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::Shape: return "shape mismatch";
    case ErrorKind::SingularDesign: return "singular design";
    case ErrorKind::OptimizationFailed: return "optimization failed";
    case ErrorKind::TrainingDiverged: return "training diverged";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace sigmaforge
