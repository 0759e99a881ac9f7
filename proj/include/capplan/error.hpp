#pragma once

#include <stdexcept>
#include <string>

namespace capplan {

/// Base of every error raised by the library. The CLI maps these to a
/// nonzero exit status and a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or malformed configuration (columns, flags, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates an invariant (ordering, ranges, empty input).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A rate or ratio whose denominator is zero, e.g. an interval with no completions.
class UndefinedRateError : public Error {
 public:
  using Error::Error;
};

/// An open queue with utilization at or above one.
class SaturationError : public Error {
 public:
  SaturationError(const std::string& what, std::string node)
      : Error(what), node_(std::move(node)) {}

  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// API misuse, such as reporting on a network that was never solved.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace capplan
