#pragma once

#include <stdexcept>
#include <string>

namespace samnet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch or empty operand.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (dataset or config file).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input whose content disagrees with a declared header or dims.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Unsupported file format version.
class VersionError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

/// Bad magic or truncated binary file.
class FormatError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

/// Invalid argument values (config, generator spec, split fraction).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf detected in a computation that must stay finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Sample id lookup failed.
class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace samnet
