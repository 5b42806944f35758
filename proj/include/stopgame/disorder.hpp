#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/rng.hpp"

namespace stopgame {

/// Single-sensor disorder model: observations follow the kernel `pre_change`
/// (F0) before the geometric change moment theta and `post_change` (F1) from
/// theta on. P(theta = j) = (1 - q)^(j-1) q.
class DisorderModel {
 public:
  static DisorderModel validate(std::vector<std::string> alphabet, std::vector<std::vector<double>> pre_change,
                                std::vector<std::vector<double>> post_change, double q, std::size_t window,
                                std::size_t x0) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("change hazard q must lie in (0,1), got " + std::to_string(q));
    if (x0 >= alphabet.size()) throw ValidationError("initial observation out of range");
    DisorderModel m{MarkovChain::validate(alphabet, pre_change), MarkovChain::validate(alphabet, post_change)};
    m.alphabet_ = std::move(alphabet);
    m.f0_ = std::move(pre_change);
    m.f1_ = std::move(post_change);
    m.q_ = q;
    m.window_ = window;
    m.x0_ = x0;
    return m;
  }

  const std::vector<std::string>& alphabet() const { return alphabet_; }
  std::size_t alphabet_size() const { return alphabet_.size(); }
  double q() const { return q_; }
  double p() const { return 1.0 - q_; }
  std::size_t window() const { return window_; }
  std::size_t x0() const { return x0_; }

  double pre(std::size_t a, std::size_t b) const { return f0_[a][b]; }
  double post(std::size_t a, std::size_t b) const { return f1_[a][b]; }
  const std::vector<std::vector<double>>& pre_matrix() const { return f0_; }
  const std::vector<std::vector<double>>& post_matrix() const { return f1_; }
  const MarkovChain& pre_chain() const { return pre_chain_; }
  const MarkovChain& post_chain() const { return post_chain_; }

  DisorderModel with_x0(std::size_t x0) const {
    if (x0 >= alphabet_.size()) throw ValidationError("initial observation out of range");
    DisorderModel m = *this;
    m.x0_ = x0;
    return m;
  }

 private:
  DisorderModel(MarkovChain pre, MarkovChain post) : pre_chain_(std::move(pre)), post_chain_(std::move(post)) {}

  MarkovChain pre_chain_;
  MarkovChain post_chain_;
  std::vector<std::string> alphabet_;
  std::vector<std::vector<double>> f0_;
  std::vector<std::vector<double>> f1_;
  double q_ = 0.5;
  std::size_t window_ = 0;
  std::size_t x0_ = 0;
};

/// Posterior summary at moment n: pi_lag[k] = P(theta = n - k | F_n) for
/// k = 0..d and total = P(theta <= n | F_n).
struct PosteriorState {
  std::size_t prev_obs = 0;
  std::vector<double> pi_lag;
  double total = 0.0;

  static PosteriorState initial(const DisorderModel& model) {
    return {model.x0(), std::vector<double>(model.window() + 1, 0.0), 0.0};
  }
};

/// Bayes update after observing the transition prev_obs -> new_obs.
inline PosteriorState posterior_step(const DisorderModel& model, const PosteriorState& state, std::size_t new_obs) {
  if (new_obs >= model.alphabet_size()) throw ValidationError("observation out of range");
  const double l1 = model.post(state.prev_obs, new_obs);
  const double l0 = model.pre(state.prev_obs, new_obs);
  const double before = 1.0 - state.total;
  const double changed = (state.total + before * model.q()) * l1;
  const double unchanged = before * model.p() * l0;
  const double denom = changed + unchanged;
  if (!(denom > 0.0))
    throw ZeroLikelihood("transition " + model.alphabet()[state.prev_obs] + " -> " + model.alphabet()[new_obs] +
                         " is impossible under both regimes");
  PosteriorState next;
  next.prev_obs = new_obs;
  next.total = changed / denom;
  next.pi_lag.resize(state.pi_lag.size());
  next.pi_lag[0] = before * model.q() * l1 / denom;
  for (std::size_t k = 1; k < next.pi_lag.size(); ++k) next.pi_lag[k] = state.pi_lag[k - 1] * l1 / denom;
  return next;
}

/// P(|theta - n| <= d | F_n) when stopping now: the lagged mass already in the
/// window plus the chance that the change falls within the next d moments.
inline double window_payoff(const DisorderModel& model, const PosteriorState& state) {
  double in_window = 0.0;
  for (double v : state.pi_lag) in_window += v;
  const double future = (1.0 - state.total) * (1.0 - std::pow(model.p(), static_cast<double>(model.window())));
  return in_window + future;
}

/// Draws theta from the geometric prior by inversion.
inline std::size_t sample_change_moment(const DisorderModel& model, RandomStream& rng) {
  const double u = rng.uniform();
  const double k = std::floor(std::log1p(-u) / std::log(model.p()));
  if (!(k < 1e15)) return static_cast<std::size_t>(1e15);
  return 1 + static_cast<std::size_t>(k);
}

struct DisorderPath {
  std::vector<std::size_t> observations;  ///< X_0..X_horizon
  std::size_t change_moment = 1;          ///< theta
};

/// Observation kernel used for the transition into X_n.
inline const MarkovChain& kernel_at(const DisorderModel& model, std::size_t n, std::size_t theta) {
  return n < theta ? model.pre_chain() : model.post_chain();
}

inline DisorderPath simulate_disorder(const DisorderModel& model, std::size_t horizon, RandomStream& rng) {
  if (horizon < 1) throw ValidationError("disorder simulation horizon must be >= 1");
  DisorderPath path;
  path.change_moment = sample_change_moment(model, rng);
  path.observations.reserve(horizon + 1);
  path.observations.push_back(model.x0());
  for (std::size_t n = 1; n <= horizon; ++n)
    path.observations.push_back(sample_next(kernel_at(model, n, path.change_moment), path.observations.back(), rng));
  return path;
}

inline DisorderPath simulate_disorder(const DisorderModel& model, std::size_t horizon, std::uint64_t seed) {
  RandomStream rng(seed);
  return simulate_disorder(model, horizon, rng);
}

inline constexpr double kMaxChainStates = 1e6;

/// Finite chain on (previous observation, posterior snapped to a G-point grid).
class DetectionChain {
 public:
  const MarkovChain& chain() const { return chain_; }
  /// window_payoff at every chain state.
  const StateFunction& utility() const { return utility_; }
  std::size_t grid_size() const { return grid_; }
  std::size_t initial_state() const { return initial_; }
  std::size_t size() const { return chain_.size(); }

  /// Grid posterior represented by chain state `idx`.
  PosteriorState state(std::size_t idx) const {
    const auto& lv = levels_[idx];
    PosteriorState s;
    s.prev_obs = obs_[idx];
    s.total = to_value(lv[0]);
    for (std::size_t k = 1; k < lv.size(); ++k) s.pi_lag.push_back(to_value(lv[k]));
    return s;
  }

  /// Chain state nearest to a continuous posterior.
  std::size_t locate(const PosteriorState& s) const {
    const auto lv = snap(s);
    return index_.at(pack(s.prev_obs, lv));
  }

 private:
  friend DetectionChain build_detection_chain(const DisorderModel& model, std::size_t grid_size);

  DetectionChain(std::size_t grid, std::size_t window, std::size_t alphabet)
      : chain_(MarkovChain::validate({{1.0}})), grid_(grid), window_(window), alphabet_(alphabet) {}

  double to_value(std::uint32_t level) const {
    return static_cast<double>(level) / static_cast<double>(grid_ - 1);
  }

  std::vector<std::uint32_t> snap(const PosteriorState& s) const {
    const double scale = static_cast<double>(grid_ - 1);
    auto level = [&](double v) {
      const double r = std::round(std::clamp(v, 0.0, 1.0) * scale);
      return static_cast<std::uint32_t>(r);
    };
    std::vector<std::uint32_t> lv;
    lv.reserve(window_ + 2);
    lv.push_back(level(s.total));
    std::uint64_t sum = 0;
    for (double v : s.pi_lag) {
      lv.push_back(level(v));
      sum += lv.back();
    }
    while (sum > lv[0]) {
      auto largest = std::max_element(lv.begin() + 1, lv.end());
      --*largest;
      --sum;
    }
    return lv;
  }

  std::uint64_t pack(std::size_t obs, const std::vector<std::uint32_t>& lv) const {
    std::uint64_t key = obs;
    for (std::uint32_t l : lv) key = key * grid_ + l;
    return key;
  }

  MarkovChain chain_;
  StateFunction utility_;
  std::size_t grid_;
  std::size_t window_;
  std::size_t alphabet_;
  std::size_t initial_ = 0;
  std::vector<std::size_t> obs_;
  std::vector<std::vector<std::uint32_t>> levels_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Number of grid posteriors with sum(pi_lag) <= total: C(G + d + 1, d + 2).
inline double grid_posterior_count(std::size_t grid_size, std::size_t window) {
  double c = 1.0;
  const std::size_t k = window + 2;
  for (std::size_t j = 1; j <= k; ++j)
    c = c * static_cast<double>(grid_size + window + 1 - k + j) / static_cast<double>(j);
  return std::round(c);
}

inline DetectionChain build_detection_chain(const DisorderModel& model, std::size_t grid_size) {
  if (grid_size < 2) throw ValidationError("grid size must be >= 2");
  const std::size_t alphabet = model.alphabet_size();
  const std::size_t window = model.window();
  const double count = static_cast<double>(alphabet) * grid_posterior_count(grid_size, window);
  if (count > kMaxChainStates)
    throw GridTooLarge("detection chain would have " + std::to_string(static_cast<long long>(count)) +
                       " states (limit 1e6)");
  if (std::log2(static_cast<double>(grid_size)) * static_cast<double>(window + 2) +
          std::log2(static_cast<double>(alphabet)) >
      62.0)
    throw GridTooLarge("grid key space exceeds 64 bits");

  DetectionChain dc(grid_size, window, alphabet);
  // Enumerate (obs, total level, lag levels) with sum of lags <= total.
  std::vector<std::uint32_t> lv(window + 2, 0);
  std::function<void(std::size_t, std::size_t, std::uint32_t)> fill = [&](std::size_t obs, std::size_t k,
                                                                          std::uint32_t budget) {
    if (k == lv.size()) {
      dc.index_.emplace(dc.pack(obs, lv), dc.obs_.size());
      dc.obs_.push_back(obs);
      dc.levels_.push_back(lv);
      return;
    }
    for (std::uint32_t l = 0; l <= budget; ++l) {
      lv[k] = l;
      fill(obs, k + 1, budget - l);
    }
    lv[k] = 0;
  };
  for (std::size_t obs = 0; obs < alphabet; ++obs) {
    for (std::uint32_t total = 0; total < grid_size; ++total) {
      lv[0] = total;
      fill(obs, 1, total);
    }
  }

  const std::size_t states = dc.obs_.size();
  std::vector<std::vector<Transition>> rows(states);
  dc.utility_.resize(states);
  std::vector<std::string> labels;
  labels.reserve(states);
  for (std::size_t s = 0; s < states; ++s) {
    const PosteriorState ps = dc.state(s);
    dc.utility_[s] = window_payoff(model, ps);
    std::string label = model.alphabet()[ps.prev_obs] + ":" + std::to_string(dc.levels_[s][0]);
    for (std::size_t k = 1; k < dc.levels_[s].size(); ++k) label += "/" + std::to_string(dc.levels_[s][k]);
    labels.push_back(std::move(label));

    const double before = 1.0 - ps.total;
    const double changed_weight = ps.total + before * model.q();
    const double unchanged_weight = before * model.p();
    std::vector<Transition> row;
    for (std::size_t b = 0; b < alphabet; ++b) {
      const double pb = changed_weight * model.post(ps.prev_obs, b) + unchanged_weight * model.pre(ps.prev_obs, b);
      if (!(pb > 0.0)) continue;
      row.push_back({dc.locate(posterior_step(model, ps, b)), pb});
    }
    std::sort(row.begin(), row.end(), [](const Transition& a, const Transition& b) { return a.to < b.to; });
    std::vector<Transition> merged;
    for (const Transition& t : row) {
      if (!merged.empty() && merged.back().to == t.to)
        merged.back().prob += t.prob;
      else
        merged.push_back(t);
    }
    rows[s] = std::move(merged);
  }
  dc.chain_ = MarkovChain::from_rows(std::move(labels), std::move(rows));
  dc.initial_ = dc.locate(PosteriorState::initial(model));
  return dc;
}

/// Stop rule on posterior states; `moment` is n >= 1.
using PosteriorPolicy = std::function<bool(std::size_t moment, const PosteriorState&)>;

struct McEstimate {
  std::size_t reps = 0;
  /// Frequency of |theta - tau| <= d.
  double estimate = 0.0;
  double std_error = 0.0;
  /// Mean of window_payoff at tau, and its paired difference with the hit
  /// indicator (tower-property check).
  double payoff_mean = 0.0;
  double payoff_std_error = 0.0;
  double diff_mean = 0.0;
  double diff_std_error = 0.0;
};

namespace detail {

/// Streaming mean / sample standard error.
class RunningMoments {
 public:
  void add(double v) {
    ++n_;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - mean_);
  }
  double mean() const { return mean_; }
  double std_error() const {
    if (n_ < 2) return 0.0;
    return std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_));
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace detail

/// Monte Carlo estimate of P(|theta - tau| <= d) for the stop time of `policy`,
/// forced to stop at `horizon`. Replication r draws from stream (seed, r).
inline McEstimate evaluate_policy_mc(const DisorderModel& model, const PosteriorPolicy& policy, std::size_t horizon,
                                     std::size_t reps, std::uint64_t seed) {
  if (horizon < 1) throw ValidationError("policy evaluation horizon must be >= 1");
  if (reps < 1) throw ValidationError("need at least one replication");
  detail::RunningMoments hit_stats, payoff_stats, diff_stats;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream rng = RandomStream::derive(seed, r);
    const std::size_t theta = sample_change_moment(model, rng);
    PosteriorState state = PosteriorState::initial(model);
    std::size_t tau = horizon;
    for (std::size_t n = 1; n <= horizon; ++n) {
      const std::size_t obs = sample_next(kernel_at(model, n, theta), state.prev_obs, rng);
      state = posterior_step(model, state, obs);
      if (n == horizon || policy(n, state)) {
        tau = n;
        break;
      }
    }
    const std::size_t dist = theta > tau ? theta - tau : tau - theta;
    const double hit = dist <= model.window() ? 1.0 : 0.0;
    const double payoff = window_payoff(model, state);
    hit_stats.add(hit);
    payoff_stats.add(payoff);
    diff_stats.add(payoff - hit);
  }
  McEstimate est;
  est.reps = reps;
  est.estimate = hit_stats.mean();
  est.std_error = hit_stats.std_error();
  est.payoff_mean = payoff_stats.mean();
  est.payoff_std_error = payoff_stats.std_error();
  est.diff_mean = diff_stats.mean();
  est.diff_std_error = diff_stats.std_error();
  return est;
}

}  // namespace stopgame
