#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrhp {

/// Invalid argument or configuration value. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well-formed but carries no usable information
/// (e.g. an all-zero reference set for step-size selection).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite intermediate or unrecoverable numerical breakdown.
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// Gram matrix not positive definite without diagonal loading. Carries the
/// ridge the caller should retry with.
class SingularGramError : public NumericalError {
 public:
  SingularGramError(const std::string& what, double suggested_ridge)
      : NumericalError(what), suggested_ridge_(suggested_ridge) {}
  double suggested_ridge() const noexcept { return suggested_ridge_; }

 private:
  double suggested_ridge_;
};

/// Exhaustive search refused because the search space exceeds the guard.
class SearchSpaceError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace lrhp
