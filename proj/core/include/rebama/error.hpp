#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rebama {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: config values, shapes, file contents. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A dispatch action left its simplex beyond tolerance.
class ConstraintViolation : public ValidationError {
 public:
  ConstraintViolation(int region, std::string row, const std::string& what);

  int region() const { return region_; }
  const std::string& row() const { return row_; }

 private:
  int region_;
  std::string row_;
};

// Dykstra ran out of cycles. Carries the last iterate and the last cycle's movement.
class NonConvergence : public Error {
 public:
  NonConvergence(Eigen::VectorXd last_iterate, double residual, int cycles);

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }
  int cycles() const { return cycles_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
  int cycles_;
};

// NaN/Inf in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rebama
