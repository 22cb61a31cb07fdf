#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcov {

/// Failure categories. The CLI maps each one onto a stable exit code.
enum class ErrorKind {
  kDomain,       // input outside the mathematical domain (delta = 0, non-PSD, ...)
  kNumeric,      // an iterative routine failed to converge
  kParse,        // malformed file content
  kSchema,       // configuration document rejected
  kCalibration,  // no grid constant reached the requested coverage
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::kDomain, what) {}
};

class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, double residual)
      : Error(ErrorKind::kNumeric, what), residual_(residual) {}
  /// Residual at the point of failure (off-diagonal norm, iterate distance, ...).
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ", column " +
                                     std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& message)
      : Error(ErrorKind::kSchema, path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class CalibrationFailure : public Error {
 public:
  CalibrationFailure(const std::string& what, double best_coverage)
      : Error(ErrorKind::kCalibration, what), best_coverage_(best_coverage) {}
  double best_coverage() const noexcept { return best_coverage_; }

 private:
  double best_coverage_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace mcov
