// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>

namespace bncrowd {

// Two families: ValidationError for bad inputs (CLI exit code 1) and
// RuntimeError for failures discovered while running (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RuntimeError : public Error {
 public:
  using Error::Error;
};

// Containers dimensioned inconsistently with each other.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Argument outside the mathematical domain of a function or distribution.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedModelError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateDistributionError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class CoverageError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class FeasibilityError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class SizeError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class PairingError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class StateError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

}  // namespace bncrowd
