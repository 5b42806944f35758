#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stopgame {

/// Input that violates a model invariant. The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative computation that did not reach its tolerance. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MonotonicityViolation : public ValidationError {
 public:
  MonotonicityViolation(std::uint32_t winning, std::uint32_t losing_superset, std::string msg)
      : ValidationError(std::move(msg)), winning_(winning), losing_(losing_superset) {}
  /// S with phi(S) = 1.
  std::uint32_t winning() const { return winning_; }
  /// T with S a subset of T and phi(T) = 0.
  std::uint32_t losing_superset() const { return losing_; }

 private:
  std::uint32_t winning_;
  std::uint32_t losing_;
};

class GrandCoalitionLosing : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyCoalitionWinning : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RowSumError : public ValidationError {
 public:
  RowSumError(std::size_t row, double deviation, std::string msg)
      : ValidationError(std::move(msg)), row_(row), deviation_(deviation) {}
  std::size_t row() const { return row_; }
  double deviation() const { return deviation_; }

 private:
  std::size_t row_;
  double deviation_;
};

class NegativeEntry : public ValidationError {
 public:
  NegativeEntry(std::size_t row, std::size_t col, std::string msg)
      : ValidationError(std::move(msg)), row_(row), col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class TooManyDeviations : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ZeroLikelihood : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GridTooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Value iteration stopped at max_iter without meeting the tolerance.
class NotConverged : public NumericalError {
 public:
  NotConverged(std::vector<double> residuals, std::string msg)
      : NumericalError(std::move(msg)), residuals_(std::move(residuals)) {}
  const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace stopgame
