#pragma once

#include <stdexcept>
#include <string>

namespace distillab {

// Domain error categories shared by all modules. The CLI maps any DomainError
// to exit code 1 and prints the category name, so names are part of the
// external contract.
enum class ErrorKind {
  kInvalidClassCount,
  kInvalidCoefficient,
  kInvalidInput,
  kShapeError,
  kSpecError,
  kCacheError,
  kDivergenceError,
  kGroupingError,
  kDataError,
  kGeometryError,
};

inline const char* error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidClassCount: return "invalid-class-count";
    case ErrorKind::kInvalidCoefficient: return "invalid-coefficient";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kShapeError: return "shape-error";
    case ErrorKind::kSpecError: return "spec-error";
    case ErrorKind::kCacheError: return "cache-error";
    case ErrorKind::kDivergenceError: return "divergence-error";
    case ErrorKind::kGroupingError: return "grouping-error";
    case ErrorKind::kDataError: return "data-error";
    case ErrorKind::kGeometryError: return "geometry-error";
  }
  return "unknown-error";
}

class DomainError : public std::runtime_error {
 public:
  DomainError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace distillab
