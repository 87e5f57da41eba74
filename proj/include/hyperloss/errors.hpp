#pragma once

#include <stdexcept>
#include <string>

namespace hyperloss {

// Base of every error the library throws. The CLI maps the category onto
// an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad inputs: invalid shapes, malformed rows, out-of-range arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RowError : public ValidationError {
 public:
  RowError(std::size_t line, const std::string& reason)
      : ValidationError("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ArithmeticOverflow : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystem : public NumericError {
 public:
  SingularSystem(std::string column, const std::string& what)
      : NumericError(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class UndefinedVariance : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonphysicalTime : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateConstraint : public NumericError {
 public:
  using NumericError::NumericError;
};

// File access and parsing.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace hyperloss
