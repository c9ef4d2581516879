#pragma once

#include <stdexcept>
#include <string>

namespace relform {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidGraph : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingularInnovation : public Error {
 public:
  using Error::Error;
};

class MissingEstimate : public Error {
 public:
  using Error::Error;
};

/// Raised when a weight set does not annihilate the target configuration.
class NoValidWeights : public Error {
 public:
  NoValidWeights(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Scenario file or override problem. `where` names the section or key.
class ConfigError : public Error {
 public:
  ConfigError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace relform
