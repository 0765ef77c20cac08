#pragma once

#include <stdexcept>
#include <string>

namespace laid {

enum class ErrorKind {
  Dimension,
  Parameter,
  Numeric,
  State,
  Data,
  Config,
  UndefinedMetric,
  UnsupportedMetric,
  Fit,
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::State: return "state";
    case ErrorKind::Data: return "data";
    case ErrorKind::Config: return "config";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::UnsupportedMetric: return "unsupported-metric";
    case ErrorKind::Fit: return "fit";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace laid
