#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"

namespace stopgame {

/// Payoffs to the maximiser (player 1) as functions of the stopping state:
/// `first` if player 1 stops alone (X), `both` on simultaneous stop (W),
/// `second` if player 2 stops alone (Y).
struct PayoffTriple {
  StateFunction first;
  StateFunction both;
  StateFunction second;

  std::size_t size() const { return both.size(); }

  void check(std::size_t states) const {
    if (first.size() != states || both.size() != states || second.size() != states)
      throw ValidationError("payoff triple must have one value per chain state");
    for (const StateFunction* g : {&first, &both, &second})
      for (double v : *g)
        if (!std::isfinite(v)) throw ValidationError("payoff triple has a non-finite value");
  }
};

struct NeveuCheck {
  bool ordered = true;
  std::optional<std::size_t> witness;  ///< first state with X > W or W > Y
};

/// Whether X <= W <= Y holds at every state.
inline NeveuCheck check_neveu(const PayoffTriple& triple) {
  for (std::size_t x = 0; x < triple.size(); ++x)
    if (!(triple.first[x] <= triple.both[x] && triple.both[x] <= triple.second[x])) return {false, x};
  return {};
}

/// Solution of the 2x2 zero-sum stage game. Rows are player 1's
/// {stop, continue}, columns player 2's {stop, continue}.
struct StageSolution {
  double value = 0.0;
  double row_stop = 0.0;  ///< probability player 1 stops
  double col_stop = 0.0;  ///< probability player 2 stops
  bool pure = false;
};

/// Value of [[a11, a12], [a21, a22]] with the row player maximising. A pure
/// saddle is returned when one exists, the first in (stop, stop), (stop, cont),
/// (cont, stop), (cont, cont) order; otherwise the mixed solution.
inline StageSolution stage_value(double a11, double a12, double a21, double a22) {
  const std::array<std::array<double, 2>, 2> a{{{a11, a12}, {a21, a22}}};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double v = a[r][c];
      const bool row_min = v <= a[r][1 - c];
      const bool col_max = v >= a[1 - r][c];
      if (row_min && col_max) return {v, r == 0 ? 1.0 : 0.0, c == 0 ? 1.0 : 0.0, true};
    }
  }
  // No saddle: both players are fully mixed and the denominator is nonzero.
  const double denom = a11 + a22 - a12 - a21;
  StageSolution s;
  s.value = (a11 * a22 - a12 * a21) / denom;
  s.row_stop = std::clamp((a22 - a21) / denom, 0.0, 1.0);
  s.col_stop = std::clamp((a22 - a12) / denom, 0.0, 1.0);
  s.pure = false;
  return s;
}

/// value[n] and stop probabilities with n moments left; value[0] = W.
struct DynkinSolution {
  std::vector<StateFunction> value;
  /// stop_prob[n][player][state], player 0 maximises.
  std::vector<std::array<StateFunction, 2>> stop_prob;
  /// pure[n][state]: the stage game had a pure saddle.
  std::vector<std::vector<std::uint8_t>> pure;

  std::size_t horizon() const { return value.size() - 1; }
};

inline DynkinSolution solve_finite_dynkin(const MarkovChain& chain, const PayoffTriple& triple, std::size_t horizon) {
  triple.check(chain.size());
  const std::size_t states = chain.size();
  DynkinSolution sol;
  sol.value.push_back(triple.both);
  sol.stop_prob.push_back({StateFunction(states, 1.0), StateFunction(states, 1.0)});
  sol.pure.emplace_back(states, 1);
  for (std::size_t n = 1; n <= horizon; ++n) {
    const StateFunction cont = expect(chain, sol.value.back());
    StateFunction value(states);
    std::array<StateFunction, 2> prob{StateFunction(states), StateFunction(states)};
    std::vector<std::uint8_t> pure(states);
    for (std::size_t x = 0; x < states; ++x) {
      const StageSolution s = stage_value(triple.both[x], triple.first[x], triple.second[x], cont[x]);
      value[x] = s.value;
      prob[0][x] = s.row_stop;
      prob[1][x] = s.col_stop;
      pure[x] = s.pure ? 1 : 0;
    }
    sol.value.push_back(std::move(value));
    sol.stop_prob.push_back(std::move(prob));
    sol.pure.push_back(std::move(pure));
  }
  return sol;
}

}  // namespace stopgame
