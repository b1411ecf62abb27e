#pragma once

#include <stdexcept>
#include <string>

namespace posemfa {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent user input (files, arguments, configuration).
class InputError : public Error {
 public:
  using Error::Error;
};

/// The numerics could not proceed (singular covariance, empty component, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class CorrespondenceError : public InputError {
 public:
  using InputError::InputError;
};

class TooFewShapes : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateExtent : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

class IndexOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class InvalidArgument : public InputError {
 public:
  using InputError::InputError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NegativeEigenvalue : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AllZeroLikelihood : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateConfiguration : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyComponent : public NumericalError {
 public:
  EmptyComponent(std::size_t component, double mass)
      : NumericalError("component " + std::to_string(component) +
                       " has vanishing responsibility mass " +
                       std::to_string(mass)),
        component_(component),
        mass_(mass) {}

  std::size_t component() const noexcept { return component_; }
  double mass() const noexcept { return mass_; }

 private:
  std::size_t component_;
  double mass_;
};

}  // namespace posemfa
