#pragma once

#include <stdexcept>
#include <string>

namespace orcdf {

/// Base of every error thrown by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line input (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// CSV/JSON text that cannot be parsed. Carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values or diverging optimization (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A metric was requested for a model whose mastery output is not concept-indexed.
class UnsuitableMetricError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Misuse of an API contract (e.g. backward twice, missing gradients).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace orcdf
