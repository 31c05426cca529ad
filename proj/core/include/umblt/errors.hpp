#pragma once

#include <stdexcept>
#include <string>

namespace umblt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Linear solve failed (singular matrix, no convergence, residual too large).
class SolverError : public Error {
 public:
  using Error::Error;
};

// A field that must be strictly positive is not; carries the offending node.
class PositivityError : public Error {
 public:
  PositivityError(const std::string& what, int i, int j, double value)
      : Error(what), i_(i), j_(j), value_(value) {}

  int i() const { return i_; }
  int j() const { return j_; }
  double value() const { return value_; }

 private:
  int i_;
  int j_;
  double value_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace umblt
