#pragma once

#include <stdexcept>
#include <string>

namespace fes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Requested steady force exceeds what a saturated muscle can hold.
class UnreachableForce : public Error {
 public:
  using Error::Error;
};

/// Adaptive step controller shrank the step below its floor.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

class QuadratureNoConvergence : public Error {
 public:
  using Error::Error;
};

/// Explicit Euler factor 1 - h*m2 left the unit disc.
class UnstableStep : public Error {
 public:
  using Error::Error;
};

/// Decision vector violates time ordering; objectives are undefined there.
class InfeasibleSigma : public Error {
 public:
  using Error::Error;
};

/// Finite-difference probe cannot be placed without breaking time ordering.
class StepCollision : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fes
