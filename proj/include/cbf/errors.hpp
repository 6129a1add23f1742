#pragma once

#include <stdexcept>
#include <string>

namespace cbf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid construction parameters (negative radius, zero gain, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Lg h = 0 while Lf h + alpha(h) < 0: no input satisfies the constraint.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Task-Jacobian or barrier-gradient Gram determinant below threshold.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The stacked Jacobian of (w, h) is not invertible at q.
class DiffeomorphismError : public Error {
 public:
  using Error::Error;
};

/// B_h vanishes: the barrier coordinate is not inertially coupled with u.
class CouplingError : public Error {
 public:
  using Error::Error;
};

/// A situation the theory rules out inside the safe set was observed.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The integrated state stopped being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Robust-filter bounds are missing or inconsistent.
class BoundError : public Error {
 public:
  using Error::Error;
};

/// Scenarios passed to a comparison do not share model and barrier.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// Scenario file problems; carries the offending line (0 when unknown).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace cbf
