#pragma once

#include <stdexcept>
#include <string>

namespace qsme {

/// Input that violates the model-file schema or a type invariant.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A stability-analysis precondition does not hold (e.g. GAS queried on a
/// non-invariant model).
class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

/// The Lyapunov certificate construction ran out of admissible perturbations.
class CertificateError : public std::runtime_error {
 public:
  explicit CertificateError(const std::string& what) : std::runtime_error(what) {}
};

/// Fatal floating-point failure inside an integrator step.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qsme
