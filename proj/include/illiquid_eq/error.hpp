#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace illiquid_eq {

/// Bad user input: malformed config, violated preconditions, unreadable data.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Picard coupling iteration failed to settle within its iteration cap.
class ConvergenceError : public NumericalError {
public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : NumericalError(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

/// Data is too rough for the derivative chain an operation needs.
class SmoothnessError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace illiquid_eq
