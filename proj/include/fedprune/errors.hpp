#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedprune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated (range, length, label value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An operation that depends on a cached forward pass ran without one.
class MissingCacheError : public Error {
 public:
  using Error::Error;
};

/// Sparse payload and mask disagree (digest mismatch, wrong length).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A value that must be zero under the mask is not.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::size_t line = 0)
      : Error(line == 0 ? message
                        : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fedprune
