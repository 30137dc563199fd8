#pragma once

#include <stdexcept>

namespace bergman {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration: bad parameter ranges, unknown keys, unreadable or
/// mismatched cache files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the mathematical domain (|z| >= 1, endpoint beyond the
/// graph radius, quadrature disc escaping the disc, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Weight specification violating its invariants (negative coefficients,
/// A = B = 0 so the Laplacian vanishes identically).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Operation applied to a spec it does not support, e.g. a moment series for
/// a non-radial weight.
class MethodMismatchError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Requested accuracy not achievable: quadrature non-convergence, series
/// truncation or divergence guard, ill-conditioned Gram systems. The message
/// carries the achieved bound.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

}  // namespace bergman
