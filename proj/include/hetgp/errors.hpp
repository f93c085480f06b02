#pragma once

#include <stdexcept>
#include <string>

namespace hetgp {

// Bad arguments, mismatched dimensions, invalid configuration.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization failure or loss of positive definiteness.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cavity precision is not positive definite; the site update is skipped.
class CavityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Tilted normalizer underflowed or the integrand was not finite.
class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CSV parse failure; the message carries the line number.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hetgp
