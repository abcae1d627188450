#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace projdyn {

/// Base class for all library errors that are not precondition violations.
/// Precondition violations throw std::invalid_argument directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The evaluation point is on or too close to the singular ray [c].
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The point lies outside the domain of a screen or force field.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A state fails its own invariants (constraint violated beyond tolerance).
class InconsistentStateError : public Error {
 public:
  using Error::Error;
};

/// Adaptive step size underflowed without an identifiable singularity.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied evaluator failed inside a finite-difference stencil.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Structured validation failure: carries one message per violation,
/// each prefixed with the config field path.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string all = "config validation failed:";
    for (const auto& s : issues) all += "\n  " + s;
    return all;
  }
  std::vector<std::string> issues_;
};

}  // namespace projdyn
