#pragma once

#include <stdexcept>
#include <string>

namespace flesd {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input would force a NaN/Inf (zero-norm vector, empty anchor set, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Out-of-range hyperparameter or argument.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated binary snapshot.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV cell; the message names the 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// CSV rows of inconsistent width, or an empty dataset.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class PartitionInfeasibleError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration. `path()` is the JSON field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace flesd
