#pragma once

#include <stdexcept>
#include <string>

namespace contdyn {

// Violated precondition on an argument (bad dimension, negative time, ...).
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A series or quadrature could not reach its requested tolerance.
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string& what, double achieved_error)
      : std::runtime_error(what), achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

private:
  double achieved_error_;
};

// Operation is not defined for the given kernel/function combination.
class Unsupported : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace contdyn
