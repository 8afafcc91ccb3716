#pragma once

#include <stdexcept>
#include <string>

namespace skyloss {

enum class ErrorKind {
  DegenerateGeometry,
  Range,
  UnsupportedOperation,
  NumericFailure,
  Parse,
  Lookup,
  SingularFit,
  Sign,
  Underdetermined,
  Schema,
  Mismatch,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library. The kind decides the CLI exit code:
/// numeric failures map to 1, everything else is a validation error (2).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::Range: return "range error";
    case ErrorKind::UnsupportedOperation: return "unsupported operation";
    case ErrorKind::NumericFailure: return "numeric failure";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Lookup: return "lookup error";
    case ErrorKind::SingularFit: return "singular fit";
    case ErrorKind::Sign: return "sign error";
    case ErrorKind::Underdetermined: return "underdetermined fit";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Mismatch: return "mismatch";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace skyloss
