#pragma once

#include <stdexcept>
#include <string>

namespace tnfp {

/// Invalid or inconsistent configuration (dimension mismatch, bad keys, bad shapes).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied data (empty sample sets, degenerate domains).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state in a simulation or training run.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

/// Model parameters outside their admissible set (zero bandwidth, Z <= 0).
class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tnfp
