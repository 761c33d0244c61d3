#pragma once

#include <stdexcept>
#include <string>

namespace tsvsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Total Hilbert-space dimension would exceed the configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Register names or dimensions do not line up.
class BasisError : public Error {
 public:
  using Error::Error;
};

/// A numerical contract (unitarity, hermiticity, completeness, ...) is broken.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Pre- and post-selection have (numerically) zero overlap.
class IncompatibleBoundaryError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// Guidance evaluated too close to a node of the wave function.
class NodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsvsim
