#pragma once

#include <stdexcept>
#include <string>

namespace spillscm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, config keys or option values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// I - rho*w*alpha' - rho*W (or I - rho*W) is numerically singular.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}

  double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

// A sampler produced a non-finite or runaway state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Internal numerical failure that positive scales should rule out.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace spillscm
