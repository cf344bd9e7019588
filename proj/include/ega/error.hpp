#pragma once

#include <stdexcept>
#include <string>

namespace ega {

/// Base of every error thrown by the library. The CLI maps these to a
/// nonzero exit code plus the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, non-finite entries, or any malformed argument.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Out-of-range configuration value or unknown identifier.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Operation called before its preconditions hold (e.g. an lr query before
/// the warmup epoch has been recorded).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DegenerateHistory : public Error {
 public:
  using Error::Error;
};

/// Every singular value of the gradient matrix is below the rank tolerance.
class DegenerateGradient : public Error {
 public:
  using Error::Error;
};

/// Iterative routine failed to converge; carries the final residual.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace ega
