#pragma once

#include <stdexcept>
#include <string>

namespace bregdistill {

// Tensor / vector shapes that do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller supplied an argument outside the documented range.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A function was evaluated outside its mathematical domain (e.g. r <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite values produced during a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature nodes do not cover the effective support of the integrand.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Affine generator whose matrix is (numerically) singular.
class DegenerateGeneratorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bregdistill
