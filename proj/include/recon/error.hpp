#pragma once

#include <stdexcept>
#include <string>

namespace recon {

/// Malformed or inconsistent user input (files, flags, dimensions).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, singular matrices, degenerate draws.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter point whose innovation covariance is singular or whose data
/// lie outside the model's support. MCMC callers treat this as zero likelihood.
class DegenerateParameterError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace recon
