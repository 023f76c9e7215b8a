#pragma once

#include <stdexcept>
#include <string>

namespace safeinit {

// Numerical routine failed to converge or produced non-finite values.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefiniteError : NumericalError {
  explicit NotPositiveDefiniteError(const std::string& what) : NumericalError(what) {}
};

struct SingularMatrixError : NumericalError {
  explicit SingularMatrixError(const std::string& what) : NumericalError(what) {}
};

// Inconsistent system model (dimensions, rank assumptions).
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Statistical estimation cannot proceed (too few samples, degenerate data,
// confidence level above the density peak).
struct EstimationError : std::runtime_error {
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

// No certifiable controller found.
struct SynthesisError : std::runtime_error {
  explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

// Learning loop failure (improvement non-convergence, rank deficiency,
// rollout divergence from a supposedly safe policy).
struct LearningError : std::runtime_error {
  explicit LearningError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace safeinit
