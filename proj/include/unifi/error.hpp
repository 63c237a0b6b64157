#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unifi {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A data error tied to a position in a line-delimited file.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
      : DataError((source.empty() ? std::string() : source + ": ") + "line " + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// A data error at a byte offset of a binary file.
class FormatError : public DataError {
 public:
  FormatError(std::size_t offset, const std::string& detail)
      : DataError("byte " + std::to_string(offset) + ": " + detail), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Geometry for which a quantity is undefined (e.g. target on an antenna).
class GeometryError : public DataError {
 public:
  using DataError::DataError;
};

/// Window too short or otherwise unusable for a feature operator.
class WindowError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace unifi
