#pragma once

#include <stdexcept>
#include <string>

namespace sharplab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or mathematical-domain violation (dimension mismatch,
// sigma * lambda >= 1, duplicate interpolation nodes, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-convergence, overflow, or a non-finite value produced mid-computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sharplab
