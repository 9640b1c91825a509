#pragma once

#include <stdexcept>
#include <string>

namespace featline {

/// Broad failure classes; the CLI maps these onto process exit codes.
enum class ErrorKind {
  config,     // malformed or out-of-range configuration
  data,       // parse, IO and insufficient-data failures
  numerical,  // shape, domain and conditioning failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorKind::numerical, "shape error: " + what) {}
};

/// Non-finite input, or an iteration that failed to converge.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorKind::numerical, "domain error: " + what) {}
};

/// A metric matrix that is not safely positive definite.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double smallest_eigenvalue)
      : Error(ErrorKind::numerical, "conditioning error: " + what),
        smallest_eigenvalue_(smallest_eigenvalue) {}

  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error(ErrorKind::data, "parse error in " + field + ": " + what),
        field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(ErrorKind::data, "io error: " + what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::data, "insufficient data: " + what) {}
};

class DegenerateLineError : public Error {
 public:
  explicit DegenerateLineError(const std::string& what)
      : Error(ErrorKind::numerical, "degenerate line: " + what) {}
};

class NoUsableLinesError : public Error {
 public:
  explicit NoUsableLinesError(const std::string& what)
      : Error(ErrorKind::numerical, "no usable lines: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::config, "config error: " + what) {}
};

}  // namespace featline
