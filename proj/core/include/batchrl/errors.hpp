#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace batchrl {

// Invalid settings, arity mismatches, malformed files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation invoked out of order (e.g. backward before forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Base for numerical failures. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The integrator produced a non-finite value. Carries the offending state.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, std::vector<double> state)
      : NumericalError(what), state_(std::move(state)) {}

  const std::vector<double>& state() const noexcept { return state_; }

 private:
  std::vector<double> state_;
};

}  // namespace batchrl
