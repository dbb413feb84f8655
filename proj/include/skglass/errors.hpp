#pragma once

#include <stdexcept>
#include <string>

namespace skglass {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad parameters, bad config text, inconsistent dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between a coupling matrix and a configuration or file.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// An exact method was asked to run beyond its enumeration gate.
class GateError : public Error {
 public:
  using Error::Error;
};

/// Binary file problems: bad magic, wrong version, truncation, checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not reach its tolerance. Carries the best estimate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate, double residual)
      : Error(what), best_estimate_(best_estimate), residual_(residual) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double residual() const noexcept { return residual_; }

 private:
  double best_estimate_;
  double residual_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

inline void require_gate(bool condition, const std::string& message) {
  if (!condition) throw GateError(message);
}

}  // namespace skglass
