#pragma once

#include <stdexcept>
#include <string>

namespace biphoton {

// Invalid argument or violated precondition (std::domain_error keeps the
// standard-library meaning: input outside the function's domain).
using DomainError = std::domain_error;

/// Numerical failure: quadrature or series that did not converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fit that cannot be posed (no modulation to lock onto, degenerate data).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void domain_fail(const std::string& what) {
  throw DomainError(what);
}

inline void require(bool cond, const char* what) {
  if (!cond) domain_fail(what);
}

}  // namespace detail
}  // namespace biphoton
