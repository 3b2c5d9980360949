#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tvarch {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid models, out-of-range indices.
/// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not complete (singular systems, degenerate
/// data). The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public NumericalError {
 public:
  EmptyWindow(std::ptrdiff_t t, double b)
      : NumericalError("empty kernel window at t=" + std::to_string(t) +
                       " with bandwidth " + std::to_string(b)),
        t_(t) {}
  std::ptrdiff_t t() const noexcept { return t_; }

 private:
  std::ptrdiff_t t_;
};

class IndexOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class ContractionViolated : public InputError {
 public:
  ContractionViolated(double u, double sum)
      : InputError("contraction violated: sum of lag coefficients is " +
                   std::to_string(sum) + " at u=" + std::to_string(u)),
        u_(u),
        sum_(sum) {}
  double u() const noexcept { return u_; }
  double sum() const noexcept { return sum_; }

 private:
  double u_;
  double sum_;
};

class NonPositiveIntercept : public InputError {
 public:
  NonPositiveIntercept(double u, double value)
      : InputError("intercept function must be positive, got " +
                   std::to_string(value) + " at u=" + std::to_string(u)) {}
};

class NegativeLagCoefficient : public InputError {
 public:
  NegativeLagCoefficient(std::size_t j, double u, double value)
      : InputError("lag coefficient a_" + std::to_string(j) +
                   " must be non-negative, got " + std::to_string(value) +
                   " at u=" + std::to_string(u)) {}
};

class DegenerateSeries : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularSmoothedMoment : public NumericalError {
 public:
  explicit SingularSmoothedMoment(std::ptrdiff_t t)
      : NumericalError("smoothed moment matrix is singular at t=" +
                       std::to_string(t)),
        t_(t) {}
  std::ptrdiff_t t() const noexcept { return t_; }

 private:
  std::ptrdiff_t t_;
};

class SingularDesign : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonPositiveVolatility : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AllSingular : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonPositivePrice : public InputError {
 public:
  NonPositivePrice(std::size_t line, double value)
      : InputError("line " + std::to_string(line) +
                   ": non-positive price " + std::to_string(value)) {}
};

}  // namespace tvarch
