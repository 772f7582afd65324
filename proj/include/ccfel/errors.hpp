#pragma once

#include <stdexcept>
#include <string>

namespace ccfel {

/// Base of every error thrown by the library. `exit_code()` is what the CLI
/// returns when the error escapes a command: 2 config, 3 data, 4 numerical.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const noexcept { return 4; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Parameter vector violates the model's invariants.
class ParameterError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// State outside the model's state space (e.g. negative CIR rate).
class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GapError : public DataError {
 public:
  GapError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// The origin is not inside the convex hull of the residual vectors, so the
// empirical-likelihood constraint has no feasible solution.
class ConvexHullError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MaxIterError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FeasibilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Too many quadrature nodes (or cells) were infeasible to trust the value.
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OptimizerError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SparseNeighborhoodError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BootstrapError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ccfel
