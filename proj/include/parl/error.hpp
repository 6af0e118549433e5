#pragma once

#include <stdexcept>
#include <string>

namespace parl {

// Root of every error the library raises. All of them are recoverable; the
// library never aborts the process on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected argument or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Data index outside [0, capacity).
class IndexError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Sampling or weighting requested while the total priority mass is zero.
class EmptyError : public Error {
 public:
  using Error::Error;
};

}  // namespace parl
