#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmnn {

// Every failure raised by the library derives from Error. The category drives
// the CLI exit code (see ExitCode) so scripts can distinguish bad configs from
// bad data and numerical blow-ups.
enum class ErrorCategory { kConfig, kData, kNumeric, kStructural };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BoundsError : public DataError {
 public:
  using DataError::DataError;
};

class OrderingError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::kStructural, what) {}
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error(ErrorCategory::kStructural, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::kNumeric, what) {}
};

// Stable process exit codes for the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

inline int exit_code_for(const Error& e) noexcept {
  switch (e.category()) {
    case ErrorCategory::kConfig:
      return kExitConfig;
    case ErrorCategory::kData:
      return kExitData;
    case ErrorCategory::kNumeric:
      return kExitNumeric;
    case ErrorCategory::kStructural:
      return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace gmnn
