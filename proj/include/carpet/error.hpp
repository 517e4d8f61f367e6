#pragma once

#include <stdexcept>
#include <string>

namespace carpet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, mismatched dimensions, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// A memory or size guard was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace carpet
