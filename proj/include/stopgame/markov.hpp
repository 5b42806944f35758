#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stopgame/errors.hpp"
#include "stopgame/rng.hpp"

namespace stopgame {

/// A map g: E -> R indexed by state.
using StateFunction = std::vector<double>;

inline constexpr double kStochasticTolerance = 1e-12;

/// Nonzero entry of a transition row.
struct Transition {
  std::size_t to;
  double prob;
};

/// Finite homogeneous Markov chain with a row-stochastic kernel, stored
/// sparsely (rows keep their positive entries in increasing state order).
class MarkovChain {
 public:
  /// Validates a dense row-major matrix.
  static MarkovChain validate(std::vector<std::string> labels, const std::vector<std::vector<double>>& matrix) {
    if (matrix.size() != labels.size())
      throw ValidationError("transition matrix has " + std::to_string(matrix.size()) + " rows for " +
                            std::to_string(labels.size()) + " states");
    std::vector<std::vector<Transition>> rows(matrix.size());
    for (std::size_t x = 0; x < matrix.size(); ++x) {
      if (matrix[x].size() != labels.size())
        throw ValidationError("transition row " + std::to_string(x) + " has " + std::to_string(matrix[x].size()) +
                              " entries, expected " + std::to_string(labels.size()));
      for (std::size_t y = 0; y < matrix[x].size(); ++y) rows[x].push_back({y, matrix[x][y]});
    }
    return from_rows(std::move(labels), std::move(rows));
  }

  static MarkovChain validate(const std::vector<std::vector<double>>& matrix) {
    return validate(default_labels(matrix.size()), matrix);
  }

  /// Validates sparse rows. Entries must be sorted by target; zeros are dropped.
  static MarkovChain from_rows(std::vector<std::string> labels, std::vector<std::vector<Transition>> rows) {
    if (labels.empty()) throw ValidationError("a chain needs at least one state");
    if (rows.size() != labels.size()) throw ValidationError("row count does not match state count");
    MarkovChain chain;
    chain.labels_ = std::move(labels);
    chain.offsets_.reserve(rows.size() + 1);
    chain.offsets_.push_back(0);
    for (std::size_t x = 0; x < rows.size(); ++x) {
      double sum = 0.0;
      std::size_t prev_to = 0;
      bool first = true;
      for (const Transition& t : rows[x]) {
        if (t.to >= rows.size())
          throw ValidationError("row " + std::to_string(x) + " points at unknown state " + std::to_string(t.to));
        if (!first && t.to <= prev_to)
          throw ValidationError("row " + std::to_string(x) + " entries are not strictly increasing");
        if (!std::isfinite(t.prob))
          throw ValidationError("row " + std::to_string(x) + " has a non-finite entry");
        if (t.prob < 0.0)
          throw NegativeEntry(x, t.to,
                              "negative transition probability " + std::to_string(t.prob) + " at (" +
                                  std::to_string(x) + "," + std::to_string(t.to) + ")");
        first = false;
        prev_to = t.to;
        sum += t.prob;
        if (t.prob > 0.0) chain.entries_.push_back(t);
      }
      const double deviation = sum - 1.0;
      if (std::abs(deviation) > kStochasticTolerance)
        throw RowSumError(x, deviation,
                          "row " + std::to_string(x) + " sums to " + std::to_string(sum) + " (deviation " +
                              std::to_string(deviation) + ")");
      chain.offsets_.push_back(chain.entries_.size());
    }
    return chain;
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t x) const { return labels_[x]; }

  std::span<const Transition> row(std::size_t x) const {
    return {entries_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
  }

  /// P(x, y); linear in the row length.
  double prob(std::size_t x, std::size_t y) const {
    for (const Transition& t : row(x))
      if (t.to == y) return t.prob;
    return 0.0;
  }

  std::size_t nonzeros() const { return entries_.size(); }

  static std::vector<std::string> default_labels(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i + 1));
    return out;
  }

 private:
  MarkovChain() = default;

  std::vector<std::string> labels_;
  std::vector<std::size_t> offsets_;
  std::vector<Transition> entries_;
};

/// (Pg)(x) = sum_y P(x,y) g(y).
inline StateFunction expect(const MarkovChain& chain, std::span<const double> g) {
  StateFunction out(chain.size(), 0.0);
  for (std::size_t x = 0; x < chain.size(); ++x) {
    double acc = 0.0;
    for (const Transition& t : chain.row(x)) acc += t.prob * g[t.to];
    out[x] = acc;
  }
  return out;
}

/// Inverse-CDF walk over the row of `x` in state order.
inline std::size_t sample_next(const MarkovChain& chain, std::size_t x, RandomStream& rng) {
  const auto row = chain.row(x);
  const double u = rng.uniform();
  double cum = 0.0;
  for (const Transition& t : row) {
    cum += t.prob;
    if (u < cum) return t.to;
  }
  return row.back().to;  // u landed in the rounding gap below 1
}

/// Path (x0, X_1, ..., X_horizon).
inline std::vector<std::size_t> simulate(const MarkovChain& chain, std::size_t x0, std::size_t horizon,
                                         RandomStream& rng) {
  if (x0 >= chain.size()) throw ValidationError("initial state out of range");
  std::vector<std::size_t> path;
  path.reserve(horizon + 1);
  path.push_back(x0);
  for (std::size_t n = 0; n < horizon; ++n) path.push_back(sample_next(chain, path.back(), rng));
  return path;
}

inline std::vector<std::size_t> simulate(const MarkovChain& chain, std::size_t x0, std::size_t horizon,
                                         std::uint64_t seed) {
  RandomStream rng(seed);
  return simulate(chain, x0, horizon, rng);
}

}  // namespace stopgame
