#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ipcc {

enum class ErrorKind {
  Parse,
  Shape,
  NonFinite,
  Io,
  Dimension,
  Domain,
  NotPositiveDefinite,
  DegenerateHeading,
  DegenerateFeature,
  ZeroVariance,
  InvalidCorrelation,
  Config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Io: return "io";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NotPositiveDefinite: return "not-positive-definite";
    case ErrorKind::DegenerateHeading: return "degenerate-heading";
    case ErrorKind::DegenerateFeature: return "degenerate-feature";
    case ErrorKind::ZeroVariance: return "zero-variance";
    case ErrorKind::InvalidCorrelation: return "invalid-correlation";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by cholesky_factor; carries the zero-based pivot that failed.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value)
      : Error(ErrorKind::NotPositiveDefinite,
              "pivot " + std::to_string(pivot) + " = " + std::to_string(value)),
        pivot_(pivot), value_(value) {}

  std::size_t pivot() const noexcept { return pivot_; }
  double pivot_value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

}  // namespace ipcc
