#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the dynamic-programming paths it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "stopgame/disorder.hpp"
#include "stopgame/dynkin_game.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/simple_game.hpp"
#include "stopgame/voting_game.hpp"

namespace stopgame::oracle {

/// Dense matrix view of a chain.
inline std::vector<std::vector<double>> dense(const MarkovChain& chain) {
  std::vector<std::vector<double>> m(chain.size(), std::vector<double>(chain.size(), 0.0));
  for (std::size_t x = 0; x < chain.size(); ++x)
    for (const Transition& t : chain.row(x)) m[x][t.to] = t.prob;
  return m;
}

/// Calls visit(path, probability) for every path X_0 = x0, X_1..X_len with
/// positive probability.
inline void for_each_path(const MarkovChain& chain, std::size_t x0, std::size_t len,
                          const std::function<void(const std::vector<std::size_t>&, double)>& visit) {
  std::vector<std::size_t> path{x0};
  std::function<void(double)> rec = [&](double prob) {
    if (path.size() == len + 1) {
      visit(path, prob);
      return;
    }
    for (const Transition& t : chain.row(path.back())) {
      path.push_back(t.to);
      rec(prob * t.prob);
      path.pop_back();
    }
  };
  rec(1.0);
}

/// Classical single-player optimal stopping: v_n = P max(f, v_{n-1}), v_0 = f.
inline std::vector<StateFunction> classical_stopping(const MarkovChain& chain, const StateFunction& f,
                                                     std::size_t horizon) {
  const auto P = dense(chain);
  std::vector<StateFunction> v{f};
  for (std::size_t n = 1; n <= horizon; ++n) {
    StateFunction next(f.size(), 0.0);
    for (std::size_t x = 0; x < f.size(); ++x)
      for (std::size_t y = 0; y < f.size(); ++y) next[x] += P[x][y] * std::max(f[y], v.back()[y]);
    v.push_back(next);
  }
  return v;
}

/// E_x0 f_i(X_t) by enumerating every path, with the forced stop at N.
inline std::vector<double> payoff_by_paths(const GameSpec& spec, const StoppingProfile& profile, std::size_t x0) {
  const std::size_t horizon = profile.stages();
  std::vector<double> out(spec.players(), 0.0);
  for_each_path(spec.chain, x0, horizon, [&](const std::vector<std::size_t>& path, double prob) {
    const auto t = stop_time(profile, spec.game, path);
    const std::size_t n = t.value_or(horizon);
    for (std::size_t i = 0; i < spec.players(); ++i) out[i] += prob * spec.utilities[i][path[n]];
  });
  return out;
}

/// max over all Markov deviations of player i, each evaluated by path enumeration.
inline double best_deviation_by_paths(const GameSpec& spec, const StoppingProfile& profile, std::size_t player,
                                      std::size_t x0) {
  const std::size_t states = spec.chain.size();
  const std::size_t bits = profile.stages() * states;
  StoppingProfile trial = profile;
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << bits); ++code) {
    for (std::size_t b = 0; b < bits; ++b) trial.set(b / states + 1, player, b % states, (code >> b) & 1U);
    best = std::max(best, payoff_by_paths(spec, trial, x0)[player]);
  }
  return best;
}

/// Every family of coalitions on p players that is closed under supersets
/// (including the empty family and the family of all coalitions).
inline std::vector<std::vector<Coalition>> monotone_families(std::size_t p) {
  const std::size_t n = std::size_t{1} << p;
  std::vector<std::vector<Coalition>> out;
  for (std::uint64_t fam = 0; fam < (std::uint64_t{1} << n); ++fam) {
    bool monotone = true;
    for (Coalition s = 0; s < n && monotone; ++s) {
      if (!((fam >> s) & 1U)) continue;
      for (std::size_t i = 0; i < p; ++i)
        if (!((fam >> (s | (Coalition{1} << i))) & 1U)) monotone = false;
    }
    if (!monotone) continue;
    std::vector<Coalition> w;
    for (Coalition s = 0; s < n; ++s)
      if ((fam >> s) & 1U) w.push_back(s);
    out.push_back(std::move(w));
  }
  return out;
}

/// Random valid simple game: supersets of a few random nonempty coalitions.
template <class Rng>
SimpleGame random_game(std::size_t p, Rng& rng) {
  std::uniform_int_distribution<Coalition> pick(1, (Coalition{1} << p) - 1);
  std::uniform_int_distribution<int> count(1, 3);
  std::vector<Coalition> minimal;
  for (int k = count(rng); k > 0; --k) minimal.push_back(pick(rng));
  return SimpleGame::from_minimal(p, minimal);
}

template <class Rng>
MarkovChain random_chain(std::size_t states, Rng& rng, bool strictly_positive = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution zero(strictly_positive ? 0.0 : 0.3);
  std::vector<std::vector<double>> m(states, std::vector<double>(states));
  for (auto& row : m) {
    double sum = 0.0;
    for (double& v : row) {
      v = zero(rng) ? 0.0 : u(rng) + (strictly_positive ? 0.05 : 0.0);
      sum += v;
    }
    if (sum == 0.0) {
      row[0] = 1.0;
      sum = 1.0;
    }
    for (double& v : row) v /= sum;
    // Push rounding into the largest entry so the row sums to 1 within 1e-12.
    double total = 0.0;
    for (double v : row) total += v;
    *std::max_element(row.begin(), row.end()) += 1.0 - total;
  }
  return MarkovChain::validate(m);
}

template <class Rng>
StateFunction random_function(std::size_t states, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  StateFunction f(states);
  for (double& v : f) v = u(rng);
  return f;
}

/// max over a row-stop probability grid of step `step` of the worst column.
inline double grid_maxmin(double a11, double a12, double a21, double a22, double step = 1e-3) {
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= n; ++k) {
    const double p = static_cast<double>(k) / static_cast<double>(n);
    const double col_stop = p * a11 + (1 - p) * a21;
    const double col_cont = p * a12 + (1 - p) * a22;
    best = std::max(best, std::min(col_stop, col_cont));
  }
  return best;
}

/// Pure maxmin / minmax of a 2x2 matrix.
inline double pure_maxmin(double a11, double a12, double a21, double a22) {
  return std::max(std::min(a11, a12), std::min(a21, a22));
}
inline double pure_minmax(double a11, double a12, double a21, double a22) {
  return std::min(std::max(a11, a21), std::max(a12, a22));
}

/// 2x2 matrix games with a known solution on the 1e-3 grid. Even draws are
/// fully mixed: a = v + s * (u - p)(w - q) with u, w in {1, 0} and p, q
/// drawn from (0, 1) in thousandths. Odd draws are random matrices whose pure
/// maxmin equals the pure minmax, i.e. a saddle exists.
struct GridGame {
  std::array<double, 4> a;
  bool mixed;
};

template <class Rng>
GridGame random_grid_game(Rng& rng, bool mixed) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (mixed) {
    std::uniform_int_distribution<int> thousandths(1, 999);
    const double p = thousandths(rng) / 1000.0;
    const double q = thousandths(rng) / 1000.0;
    const double v = u(rng);
    const double s = 0.1 + std::abs(u(rng));
    return {{v + s * (1 - p) * (1 - q), v - s * (1 - p) * q, v - s * p * (1 - q), v + s * p * q}, true};
  }
  for (;;) {
    std::array<double, 4> a{u(rng), u(rng), u(rng), u(rng)};
    if (pure_maxmin(a[0], a[1], a[2], a[3]) == pure_minmax(a[0], a[1], a[2], a[3])) return {a, false};
  }
}

/// Pure Markov strategies of the finite Dynkin game, enumerated exhaustively.
/// A strategy is a stop set per moment 0..N-1; the result is the payoff matrix
/// (player-1 strategy x player-2 strategy) from x0.
inline std::vector<std::vector<double>> dynkin_pure_matrix(const MarkovChain& chain, const PayoffTriple& g,
                                                           std::size_t horizon, std::size_t x0) {
  const std::size_t states = chain.size();
  const std::size_t bits = horizon * states;
  const std::size_t count = std::size_t{1} << bits;
  auto stops = [&](std::size_t code, std::size_t m, std::size_t x) { return (code >> (m * states + x)) & 1U; };
  std::vector<std::vector<double>> R(count, std::vector<double>(count, 0.0));
  std::vector<std::pair<std::vector<std::size_t>, double>> paths;
  for_each_path(chain, x0, horizon, [&](const std::vector<std::size_t>& p, double prob) { paths.emplace_back(p, prob); });
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t b = 0; b < count; ++b) {
      double total = 0.0;
      for (const auto& [path, prob] : paths) {
        double pay = g.both[path[horizon]];
        for (std::size_t m = 0; m < horizon; ++m) {
          const bool s1 = stops(a, m, path[m]);
          const bool s2 = stops(b, m, path[m]);
          if (s1 && s2) { pay = g.both[path[m]]; break; }
          if (s1) { pay = g.first[path[m]]; break; }
          if (s2) { pay = g.second[path[m]]; break; }
        }
        total += prob * pay;
      }
      R[a][b] = total;
    }
  }
  return R;
}

/// Posterior quantities at moment n = obs.size() - 1 by direct enumeration of
/// theta (Bayes rule on the full path likelihood).
struct BruteForcePosterior {
  std::vector<double> pi_lag;  ///< P(theta = n - k | x_0..x_n)
  double total = 0.0;          ///< P(theta <= n | ...)
  double window = 0.0;         ///< P(|theta - n| <= d | ...)
};

inline BruteForcePosterior brute_force_posterior(const DisorderModel& m, const std::vector<std::size_t>& obs) {
  const std::size_t n = obs.size() - 1;
  const std::size_t d = m.window();
  auto likelihood = [&](std::size_t theta) {  // theta > n means "no change yet"
    double l = 1.0;
    for (std::size_t s = 1; s <= n; ++s) l *= s < theta ? m.pre(obs[s - 1], obs[s]) : m.post(obs[s - 1], obs[s]);
    return l;
  };
  // Joint weights for theta = 1..n+d explicitly, plus theta > n+d as one lump.
  std::vector<double> joint(n + d + 2, 0.0);
  double z = 0.0;
  for (std::size_t j = 1; j <= n + d; ++j) {
    joint[j] = std::pow(m.p(), static_cast<double>(j - 1)) * m.q() * likelihood(j);
    z += joint[j];
  }
  const double tail = std::pow(m.p(), static_cast<double>(n + d)) * likelihood(n + 1);
  z += tail;
  BruteForcePosterior out;
  out.pi_lag.assign(d + 1, 0.0);
  for (std::size_t j = 1; j <= n; ++j) out.total += joint[j] / z;
  for (std::size_t k = 0; k <= d && k < n; ++k) out.pi_lag[k] = joint[n - k] / z;
  const std::size_t lo = n > d ? n - d : 1;
  for (std::size_t j = lo; j <= n + d; ++j) out.window += joint[j] / z;
  return out;
}

/// P(lo <= theta <= hi) under the geometric prior, by summing the mass function.
inline double geometric_range(double q, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) s += std::pow(1.0 - q, static_cast<double>(j - 1)) * q;
  return s;
}

}  // namespace stopgame::oracle
