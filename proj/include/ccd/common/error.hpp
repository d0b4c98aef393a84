#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccd {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: unreadable files, malformed records, inconsistent corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A record failed to parse. Carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A record parsed but violates the declared feature schema.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration or arguments supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training or evaluation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccd
