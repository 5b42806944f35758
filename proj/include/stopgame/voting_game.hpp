#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/simple_game.hpp"

namespace stopgame {

/// a+ = max{0, a}.
inline double positive_part(double a) { return a > 0.0 ? a : 0.0; }

/// a- = max{0, -a}, so that a = a+ - a-.
inline double negative_part(double a) { return a < 0.0 ? -a : 0.0; }

/// The p-player stopping game: chain, utilities f_1..f_p, aggregation rule,
/// horizon N (nullopt = infinite).
struct GameSpec {
  MarkovChain chain;
  std::vector<StateFunction> utilities;
  SimpleGame game;
  std::optional<std::size_t> horizon;

  std::size_t players() const { return utilities.size(); }

  void check() const {
    if (utilities.size() != game.players())
      throw ValidationError("game has " + std::to_string(game.players()) + " players but " +
                            std::to_string(utilities.size()) + " utility functions were given");
    for (std::size_t i = 0; i < utilities.size(); ++i) {
      if (utilities[i].size() != chain.size())
        throw ValidationError("utility of player " + std::to_string(i + 1) + " has " +
                              std::to_string(utilities[i].size()) + " values for " + std::to_string(chain.size()) +
                              " states");
      for (double v : utilities[i])
        if (!std::isfinite(v))
          throw ValidationError("utility of player " + std::to_string(i + 1) + " has a non-finite value");
    }
  }
};

/// Markov stopping sets C_n^i for moments n = 1..N: player i declares stop at
/// moment n iff X_n is in C_n^i.
class StoppingProfile {
 public:
  StoppingProfile() = default;
  StoppingProfile(std::size_t stages, std::size_t players, std::size_t states, bool fill = false)
      : stages_(stages), players_(players), states_(states), bits_(stages * players * states, fill ? 1 : 0) {}

  std::size_t stages() const { return stages_; }
  std::size_t players() const { return players_; }
  std::size_t states() const { return states_; }

  /// `moment` is 1-based.
  bool stops(std::size_t moment, std::size_t player, std::size_t state) const {
    return bits_[index(moment, player, state)] != 0;
  }
  void set(std::size_t moment, std::size_t player, std::size_t state, bool stop) {
    bits_[index(moment, player, state)] = stop ? 1 : 0;
  }

  /// Coalition of players declaring stop at (moment, state).
  Coalition votes(std::size_t moment, std::size_t state) const {
    Coalition c = 0;
    for (std::size_t i = 0; i < players_; ++i)
      if (stops(moment, i, state)) c |= Coalition{1} << i;
    return c;
  }

  friend bool operator==(const StoppingProfile&, const StoppingProfile&) = default;

 private:
  std::size_t index(std::size_t moment, std::size_t player, std::size_t state) const {
    return ((moment - 1) * players_ + player) * states_ + state;
  }

  std::size_t stages_ = 0;
  std::size_t players_ = 0;
  std::size_t states_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Backward-induction output. values[i][k] is v_{i,k}, the equilibrium payoff
/// of player i with k moments left; profile stage n uses the sets
/// {f_i - v_{i,N-n} >= 0}.
struct EquilibriumSolution {
  std::vector<std::vector<StateFunction>> values;
  StoppingProfile profile;

  std::size_t horizon() const { return profile.stages(); }
  const StateFunction& value(std::size_t player, std::size_t steps_to_go) const {
    return values[player][steps_to_go];
  }
};

/// First moment 1 <= n <= N at which the aggregated declarations equal 1;
/// nullopt when none does. path[n] is X_n.
inline std::optional<std::size_t> stop_time(const StoppingProfile& profile, const SimpleGame& game,
                                            std::span<const std::size_t> path) {
  if (path.size() < profile.stages() + 1) throw ValidationError("path shorter than horizon + 1");
  for (std::size_t n = 1; n <= profile.stages(); ++n)
    if (aggregate(game, profile.votes(n, path[n]))) return n;
  return std::nullopt;
}

namespace detail {

/// Stopping sets {x : f_j(x) >= cont_j(x)} of every player, as per-state vote
/// coalitions.
inline std::vector<Coalition> threshold_votes(std::span<const StateFunction> utilities,
                                              std::span<const StateFunction> continuation) {
  const std::size_t states = utilities.front().size();
  std::vector<Coalition> votes(states, 0);
  for (std::size_t j = 0; j < utilities.size(); ++j)
    for (std::size_t y = 0; y < states; ++y)
      if (utilities[j][y] - continuation[j][y] >= 0.0) votes[y] |= Coalition{1} << j;
  return votes;
}

/// One application of the stage operator: given continuation values v' and
/// the concurrent stop sets they induce, returns for every player
///   E_x[(f_i - v')+ 1{stop if i says yes} - (f_i - v')- 1{stop if i says no} + v'].
inline std::vector<StateFunction> stage_operator(const GameSpec& spec, std::span<const StateFunction> continuation,
                                                 std::span<const Coalition> votes) {
  const std::size_t states = spec.chain.size();
  std::vector<StateFunction> out;
  out.reserve(spec.players());
  StateFunction integrand(states);
  for (std::size_t i = 0; i < spec.players(); ++i) {
    const Coalition me = Coalition{1} << i;
    const StateFunction& f = spec.utilities[i];
    const StateFunction& cont = continuation[i];
    for (std::size_t y = 0; y < states; ++y) {
      const double gap = f[y] - cont[y];
      const bool stop_if_yes = aggregate(spec.game, votes[y] | me);
      const bool stop_if_no = aggregate(spec.game, votes[y] & ~me);
      integrand[y] = (stop_if_yes ? positive_part(gap) : 0.0) - (stop_if_no ? negative_part(gap) : 0.0) + cont[y];
    }
    out.push_back(expect(spec.chain, integrand));
  }
  return out;
}

}  // namespace detail

/// Finite-horizon equilibrium by backward induction.
inline EquilibriumSolution solve_finite(const GameSpec& spec) {
  spec.check();
  if (!spec.horizon) throw ValidationError("solve_finite needs a finite horizon");
  const std::size_t horizon = *spec.horizon;
  const std::size_t p = spec.players();
  const std::size_t states = spec.chain.size();

  EquilibriumSolution sol;
  sol.values.assign(p, {});
  for (std::size_t i = 0; i < p; ++i) sol.values[i].push_back(spec.utilities[i]);
  sol.profile = StoppingProfile(horizon, p, states);

  std::vector<StateFunction> cont(spec.utilities.begin(), spec.utilities.end());
  for (std::size_t k = 1; k <= horizon; ++k) {
    const auto votes = detail::threshold_votes(spec.utilities, cont);
    const std::size_t moment = horizon - k + 1;
    for (std::size_t y = 0; y < states; ++y)
      for (std::size_t i = 0; i < p; ++i) sol.profile.set(moment, i, y, (votes[y] >> i) & 1U);
    cont = detail::stage_operator(spec, cont, votes);
    for (std::size_t i = 0; i < p; ++i) sol.values[i].push_back(cont[i]);
  }
  return sol;
}

/// Exact expected payoffs E_x0 f_i(X_t) of every player under `profile`, with
/// a forced stop at moment N when the aggregated rule has not fired earlier.
inline std::vector<double> evaluate_profile(const GameSpec& spec, const StoppingProfile& profile, std::size_t x0) {
  spec.check();
  const std::size_t horizon = profile.stages();
  const std::size_t p = spec.players();
  if (x0 >= spec.chain.size()) throw ValidationError("initial state out of range");
  if (profile.players() != p || profile.states() != spec.chain.size())
    throw ValidationError("profile shape does not match the game");
  std::vector<double> payoff(p);
  for (std::size_t i = 0; i < p; ++i) {
    if (horizon == 0) {
      payoff[i] = spec.utilities[i][x0];
      continue;
    }
    // worth[x]: payoff given the process is still running at moment n in x.
    StateFunction worth = spec.utilities[i];
    for (std::size_t n = horizon - 1; n >= 1; --n) {
      const StateFunction cont = expect(spec.chain, worth);
      for (std::size_t x = 0; x < worth.size(); ++x)
        worth[x] = aggregate(spec.game, profile.votes(n, x)) ? spec.utilities[i][x] : cont[x];
    }
    payoff[i] = expect(spec.chain, worth)[x0];
  }
  return payoff;
}

enum class DeviationMethod {
  kBestResponse,  ///< dynamic programming over (moment, state)
  kExhaustive,    ///< enumerate every Markov stopping-set sequence
};

struct DeviationReport {
  std::vector<double> profile_payoff;
  std::vector<double> best_payoff;
  std::vector<double> gap;

  double max_gap() const { return gap.empty() ? 0.0 : *std::max_element(gap.begin(), gap.end()); }
};

inline constexpr double kMaxDeviationCandidates = 1e7;

namespace detail {

inline double best_response_payoff(const GameSpec& spec, const StoppingProfile& profile, std::size_t player,
                                   std::size_t x0) {
  const std::size_t horizon = profile.stages();
  const StateFunction& f = spec.utilities[player];
  if (horizon == 0) return f[x0];
  const Coalition me = Coalition{1} << player;
  StateFunction worth = f;
  for (std::size_t n = horizon - 1; n >= 1; --n) {
    const StateFunction cont = expect(spec.chain, worth);
    for (std::size_t x = 0; x < worth.size(); ++x) {
      const Coalition others = profile.votes(n, x) & ~me;
      const double yes = aggregate(spec.game, others | me) ? f[x] : cont[x];
      const double no = aggregate(spec.game, others) ? f[x] : cont[x];
      worth[x] = std::max(yes, no);
    }
  }
  return expect(spec.chain, worth)[x0];
}

inline double exhaustive_best_payoff(const GameSpec& spec, const StoppingProfile& profile, std::size_t player,
                                     std::size_t x0) {
  const std::size_t stages = profile.stages();
  const std::size_t states = spec.chain.size();
  const std::size_t bits = stages * states;
  double best = -std::numeric_limits<double>::infinity();
  StoppingProfile trial = profile;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << bits); ++code) {
    for (std::size_t b = 0; b < bits; ++b) trial.set(b / states + 1, player, b % states, (code >> b) & 1U);
    best = std::max(best, evaluate_profile(spec, trial, x0)[player]);
  }
  return best;
}

}  // namespace detail

/// Largest gain each player can obtain by a unilateral Markov deviation from
/// `profile`, starting at x0.
inline DeviationReport deviation_gap(const GameSpec& spec, const StoppingProfile& profile, std::size_t x0,
                                     DeviationMethod method = DeviationMethod::kBestResponse) {
  DeviationReport rep;
  rep.profile_payoff = evaluate_profile(spec, profile, x0);
  const std::size_t p = spec.players();
  if (method == DeviationMethod::kExhaustive) {
    const double candidates =
        static_cast<double>(p) * std::pow(2.0, static_cast<double>(spec.chain.size() * profile.stages()));
    if (candidates > kMaxDeviationCandidates)
      throw TooManyDeviations("exhaustive deviation check would enumerate " + std::to_string(candidates) +
                              " strategies (limit 1e7)");
  }
  for (std::size_t i = 0; i < p; ++i) {
    const double best = method == DeviationMethod::kBestResponse
                            ? detail::best_response_payoff(spec, profile, i, x0)
                            : detail::exhaustive_best_payoff(spec, profile, i, x0);
    rep.best_payoff.push_back(best);
    rep.gap.push_back(best - rep.profile_payoff[i]);
  }
  return rep;
}

struct InfiniteSolution {
  std::vector<StateFunction> values;
  /// stop_sets[i][x] == 1 iff f_i(x) >= w_i(x).
  std::vector<std::vector<std::uint8_t>> stop_sets;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

/// Value iteration on the fixed-point equations w = T(w), started at w = f.
/// Never throws on non-convergence; inspect `converged`.
inline InfiniteSolution iterate_fixed_point(const GameSpec& spec, double tol, std::size_t max_iter) {
  spec.check();
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  InfiniteSolution sol;
  std::vector<StateFunction> w(spec.utilities.begin(), spec.utilities.end());
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const auto votes = detail::threshold_votes(spec.utilities, w);
    auto next = detail::stage_operator(spec, w, votes);
    double residual = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t x = 0; x < w[i].size(); ++x) residual = std::max(residual, std::abs(next[i][x] - w[i][x]));
    w = std::move(next);
    sol.residual_history.push_back(residual);
    sol.residual = residual;
    sol.iterations = it;
    if (residual < tol) {
      sol.converged = true;
      break;
    }
  }
  sol.values = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<std::uint8_t> set(w[i].size());
    for (std::size_t x = 0; x < set.size(); ++x) set[x] = spec.utilities[i][x] - w[i][x] >= 0.0 ? 1 : 0;
    sol.stop_sets.push_back(std::move(set));
  }
  return sol;
}

/// As iterate_fixed_point, but throws NotConverged (with the residual
/// history) if the sup-norm residual stays >= tol for max_iter sweeps.
inline InfiniteSolution solve_infinite(const GameSpec& spec, double tol, std::size_t max_iter) {
  InfiniteSolution sol = iterate_fixed_point(spec, tol, max_iter);
  if (!sol.converged) {
    throw NotConverged(sol.residual_history, "value iteration did not converge after " + std::to_string(max_iter) +
                                                 " iterations (last residual " + std::to_string(sol.residual) +
                                                 ")");
  }
  return sol;
}

}  // namespace stopgame
