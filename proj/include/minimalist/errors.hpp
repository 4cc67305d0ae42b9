#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace minimalist {

/// Input violates a documented precondition (non-finite data, bad shapes,
/// asymmetric matrix, out-of-range parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity is mathematically undefined for the given data, e.g. the
/// difficulty Q of a rank-0 dataset.
class UndefinedQuantity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// CSV / config parsing failure. The message names the file, row and column.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap. Carries the best iterate seen.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_value, std::vector<double> best_vector)
      : std::runtime_error(what), best_value_(best_value), best_vector_(std::move(best_vector)) {}

  double best_value() const { return best_value_; }
  const std::vector<double>& best_vector() const { return best_vector_; }

 private:
  double best_value_;
  std::vector<double> best_vector_;
};

/// Optimizer state became non-finite or exceeded the divergence threshold.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace minimalist
