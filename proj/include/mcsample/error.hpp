#pragma once

#include <stdexcept>
#include <string>

namespace mcs {

enum class ErrorKind {
  InvalidInput,
  Shape,
  InvalidMask,
  InvalidBudget,
  InvalidSigma,
  CorruptCheckpoint,
  CorruptFile,
  DivergedTraining,
  Io,
  Config,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can map it
/// to an exit code.
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
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::InvalidMask: return "invalid mask";
    case ErrorKind::InvalidBudget: return "invalid budget";
    case ErrorKind::InvalidSigma: return "invalid sigma";
    case ErrorKind::CorruptCheckpoint: return "corrupt checkpoint";
    case ErrorKind::CorruptFile: return "corrupt file";
    case ErrorKind::DivergedTraining: return "diverged training";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Config: return "invalid config";
  }
  return "error";
}

}  // namespace mcs
