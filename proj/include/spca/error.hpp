#pragma once

#include <stdexcept>
#include <string>

namespace spca {

// Base of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on a user-supplied parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A vector that must be unit-norm was not (beyond the accepted tolerance).
class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Problem too large for an enumeration routine.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Input for which the requested quantity is undefined (all-zero matrix, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Iterative method hit its cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double achieved_residual)
      : Error(what + " (achieved residual " + std::to_string(achieved_residual) + ")"),
        achieved_residual_(achieved_residual) {}

  double achieved_residual() const noexcept { return achieved_residual_; }

 private:
  double achieved_residual_;
};

// Malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace spca
