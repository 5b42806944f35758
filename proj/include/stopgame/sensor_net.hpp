#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stopgame/disorder.hpp"
#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/simple_game.hpp"
#include "stopgame/voting_game.hpp"

namespace stopgame {

/// p independent sensors fused by a simple game.
struct NetSpec {
  std::vector<DisorderModel> sensors;
  SimpleGame fusion;
  std::size_t grid_size = 11;
  std::size_t horizon = 1;

  void check() const {
    if (sensors.empty()) throw ValidationError("a net needs at least one sensor");
    if (fusion.players() != sensors.size())
      throw ValidationError("fusion game has " + std::to_string(fusion.players()) + " players for " +
                            std::to_string(sensors.size()) + " sensors");
  }
};

/// Voting game on the product of the sensors' detection chains. Product
/// states are encoded with sensor 0 as the most significant digit.
struct NetGame {
  GameSpec spec;
  std::vector<DetectionChain> channels;
  std::size_t initial_state = 0;

  std::size_t encode(std::span<const std::size_t> components) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < channels.size(); ++i) idx = idx * channels[i].size() + components[i];
    return idx;
  }

  std::vector<std::size_t> decode(std::size_t idx) const {
    std::vector<std::size_t> out(channels.size());
    for (std::size_t i = channels.size(); i-- > 0;) {
      out[i] = idx % channels[i].size();
      idx /= channels[i].size();
    }
    return out;
  }
};

inline NetGame build_net_game(const NetSpec& net) {
  net.check();
  NetGame out{GameSpec{MarkovChain::validate({{1.0}}), {}, net.fusion, net.horizon}, {}, 0};
  double product = 1.0;
  for (const DisorderModel& m : net.sensors) {
    out.channels.push_back(build_detection_chain(m, net.grid_size));
    product *= static_cast<double>(out.channels.back().size());
    if (product > kMaxChainStates)
      throw GridTooLarge("product chain would exceed 1e6 states; reduce the grid size or sensor count");
  }
  const std::size_t p = out.channels.size();
  const auto states = static_cast<std::size_t>(product);

  std::vector<std::string> labels(states);
  std::vector<std::vector<Transition>> rows(states);
  out.spec.utilities.assign(p, StateFunction(states));
  std::vector<Transition> row;
  for (std::size_t s = 0; s < states; ++s) {
    const auto comp = out.decode(s);
    std::string label;
    for (std::size_t i = 0; i < p; ++i) {
      if (i) label += ',';
      label += out.channels[i].chain().label(comp[i]);
      out.spec.utilities[i][s] = out.channels[i].utility()[comp[i]];
    }
    labels[s] = std::move(label);

    // Independent channels: product kernel, enumerated in increasing target order.
    row.clear();
    std::function<void(std::size_t, std::size_t, double)> expand = [&](std::size_t i, std::size_t target,
                                                                       double prob) {
      if (i == p) {
        row.push_back({target, prob});
        return;
      }
      for (const Transition& t : out.channels[i].chain().row(comp[i]))
        expand(i + 1, target * out.channels[i].size() + t.to, prob * t.prob);
    };
    expand(0, 0, 1.0);
    rows[s] = row;
  }
  out.spec.chain = MarkovChain::from_rows(std::move(labels), std::move(rows));

  std::vector<std::size_t> init(p);
  for (std::size_t i = 0; i < p; ++i) init[i] = out.channels[i].initial_state();
  out.initial_state = out.encode(init);
  return out;
}

struct NetSolution {
  NetGame game;
  EquilibriumSolution equilibrium;
};

inline NetSolution solve_net(const NetSpec& net) {
  if (net.horizon < 1) throw ValidationError("net horizon must be >= 1");
  NetSolution sol{build_net_game(net), {}};
  sol.equilibrium = solve_finite(sol.game.spec);
  return sol;
}

struct NetReport {
  std::size_t chain_states = 0;
  std::size_t horizon = 0;
  /// v_{i,N} at the initial product state.
  std::vector<double> dp_values;

  bool has_mc = false;
  std::size_t mc_reps = 0;
  std::vector<double> detection_frequency;
  std::vector<double> detection_std_error;
  /// stop_time_counts[n] = replications with t = n, n = 1..N (index 0 unused).
  std::vector<std::size_t> stop_time_counts;
  double mean_stop_time = 0.0;
};

/// Replays the equilibrium stopping sets on continuous-posterior disorder
/// trajectories, snapping each sensor's posterior to the grid at decision time.
inline NetReport simulate_net(const NetSpec& net, const NetSolution& sol, std::size_t reps, std::uint64_t seed) {
  const NetGame& game = sol.game;
  const std::size_t p = net.sensors.size();
  const std::size_t horizon = net.horizon;
  NetReport rep;
  rep.chain_states = game.spec.chain.size();
  rep.horizon = horizon;
  for (std::size_t i = 0; i < p; ++i) rep.dp_values.push_back(sol.equilibrium.value(i, horizon)[game.initial_state]);
  if (reps == 0) return rep;

  rep.has_mc = true;
  rep.mc_reps = reps;
  rep.stop_time_counts.assign(horizon + 1, 0);
  std::vector<detail::RunningMoments> hits(p);
  double stop_sum = 0.0;
  std::vector<std::size_t> theta(p);
  std::vector<PosteriorState> post(p);
  std::vector<std::size_t> comp(p);
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream rng = RandomStream::derive(seed, r);
    for (std::size_t i = 0; i < p; ++i) {
      theta[i] = sample_change_moment(net.sensors[i], rng);
      post[i] = PosteriorState::initial(net.sensors[i]);
    }
    std::size_t tau = horizon;
    for (std::size_t n = 1; n <= horizon; ++n) {
      for (std::size_t i = 0; i < p; ++i) {
        const DisorderModel& m = net.sensors[i];
        const std::size_t obs = sample_next(kernel_at(m, n, theta[i]), post[i].prev_obs, rng);
        post[i] = posterior_step(m, post[i], obs);
        comp[i] = game.channels[i].locate(post[i]);
      }
      if (n == horizon || aggregate(net.fusion, sol.equilibrium.profile.votes(n, game.encode(comp)))) {
        tau = n;
        break;
      }
    }
    ++rep.stop_time_counts[tau];
    stop_sum += static_cast<double>(tau);
    for (std::size_t i = 0; i < p; ++i) {
      const std::size_t dist = theta[i] > tau ? theta[i] - tau : tau - theta[i];
      hits[i].add(dist <= net.sensors[i].window() ? 1.0 : 0.0);
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    rep.detection_frequency.push_back(hits[i].mean());
    rep.detection_std_error.push_back(hits[i].std_error());
  }
  rep.mean_stop_time = stop_sum / static_cast<double>(reps);
  return rep;
}

/// Define the fusion game, build the posterior chains, solve the stopping
/// game, then evaluate the equilibrium by simulation.
inline NetReport run_pipeline(const NetSpec& net, std::size_t mc_reps, std::uint64_t seed) {
  const NetSolution sol = solve_net(net);
  return simulate_net(net, sol, mc_reps, seed);
}

}  // namespace stopgame
