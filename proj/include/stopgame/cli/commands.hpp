#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stopgame/cli/config.hpp"
#include "stopgame/cli/format.hpp"
#include "stopgame/disorder.hpp"
#include "stopgame/dynkin_game.hpp"
#include "stopgame/sensor_net.hpp"
#include "stopgame/voting_game.hpp"

namespace stopgame::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

enum class Format { kCsv, kJson };

struct CommonOptions {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::string> horizon;

  Format fmt() const { return format == "json" ? Format::kJson : Format::kCsv; }
};

/// Where a command writes its primary table.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {}

  std::ostream& stream() { return buffer_; }

  /// Writes buffered text to the file (or the fallback stream).
  void flush() {
    if (path_.empty()) {
      fallback_ << buffer_.str();
      return;
    }
    std::ofstream f(path_, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file " + path_);
    f << buffer_.str();
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

inline std::string steps_label(std::optional<std::size_t> k) { return k ? std::to_string(*k) : "inf"; }

// ---------------------------------------------------------------- solve-game

inline int cmd_solve_game(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
  const Config cfg = Config::load(opt.config);
  GameSpec spec = read_game_spec(cfg);
  if (opt.horizon) spec.horizon = parse_horizon(*opt.horizon);
  const Section g = cfg.section("game");
  const double tol = opt.tol.value_or(g.number_or("tol", 1e-10));
  const std::size_t max_iter = g.count_or("max_iter", 100000);
  const auto& labels = spec.chain.labels();
  Output o(opt.out, out);

  if (spec.horizon) {
    const EquilibriumSolution sol = solve_finite(spec);
    const std::size_t horizon = *spec.horizon;
    auto stops = [&](std::size_t i, std::size_t k, std::size_t x) {
      return spec.utilities[i][x] - sol.value(i, k)[x] >= 0.0;
    };
    if (opt.fmt() == Format::kCsv) {
      CsvWriter csv(o.stream());
      csv.header({"player", "steps_to_go", "state", "value", "stops"});
      for (std::size_t i = 0; i < spec.players(); ++i)
        for (std::size_t k = 0; k <= horizon; ++k)
          for (std::size_t x = 0; x < labels.size(); ++x)
            csv.row({std::to_string(i + 1), std::to_string(k), labels[x], format_double(sol.value(i, k)[x]),
                     stops(i, k, x) ? "1" : "0"});
    } else {
      json rows = json::array();
      for (std::size_t i = 0; i < spec.players(); ++i)
        for (std::size_t k = 0; k <= horizon; ++k)
          for (std::size_t x = 0; x < labels.size(); ++x)
            rows.push_back({{"player", i + 1},
                            {"steps_to_go", k},
                            {"state", labels[x]},
                            {"value", sol.value(i, k)[x]},
                            {"stops", stops(i, k, x) ? 1 : 0}});
      json profile = json::array();
      for (std::size_t n = 1; n <= horizon; ++n) {
        json stage = json::array();
        for (std::size_t i = 0; i < spec.players(); ++i) {
          json set = json::array();
          for (std::size_t x = 0; x < labels.size(); ++x)
            if (sol.profile.stops(n, i, x)) set.push_back(labels[x]);
          stage.push_back(set);
        }
        profile.push_back({{"moment", n}, {"stop_sets", stage}});
      }
      json doc = {{"command", "solve-game"}, {"horizon", horizon},     {"players", spec.players()},
                  {"states", labels},        {"values", rows},         {"profile", profile}};
      o.stream() << doc.dump(2) << '\n';
    }
    o.flush();
    return kOk;
  }

  InfiniteSolution sol;
  try {
    sol = solve_infinite(spec, tol, max_iter);
  } catch (const NotConverged& e) {
    err << "error: " << e.what() << '\n' << "residual history:";
    for (double r : e.residual_history()) err << ' ' << format_double(r);
    err << '\n';
    return kNumerical;
  }
  if (opt.fmt() == Format::kCsv) {
    CsvWriter csv(o.stream());
    csv.header({"player", "steps_to_go", "state", "value", "stops"});
    for (std::size_t i = 0; i < spec.players(); ++i)
      for (std::size_t x = 0; x < labels.size(); ++x)
        csv.row({std::to_string(i + 1), "inf", labels[x], format_double(sol.values[i][x]),
                 sol.stop_sets[i][x] ? "1" : "0"});
  } else {
    json rows = json::array();
    for (std::size_t i = 0; i < spec.players(); ++i)
      for (std::size_t x = 0; x < labels.size(); ++x)
        rows.push_back({{"player", i + 1},
                        {"steps_to_go", "inf"},
                        {"state", labels[x]},
                        {"value", sol.values[i][x]},
                        {"stops", static_cast<int>(sol.stop_sets[i][x])}});
    json doc = {{"command", "solve-game"},
                {"horizon", "inf"},
                {"players", spec.players()},
                {"states", labels},
                {"values", rows},
                {"converged", sol.converged},
                {"iterations", sol.iterations},
                {"residual", sol.residual},
                {"residual_history", sol.residual_history}};
    o.stream() << doc.dump(2) << '\n';
  }
  o.flush();
  return kOk;
}

// -------------------------------------------------------------------- verify

/// Optional [verify] profile = [[[labels of player 1], [labels of player 2]], ...]
/// one entry per moment 1..N.
inline StoppingProfile read_profile(const Section& v, const GameSpec& spec) {
  const auto& labels = spec.chain.labels();
  const auto* stages = v.node("profile").as_array();
  if (!stages || stages->size() != *spec.horizon)
    throw ConfigError(v.name(), "profile", "expected one entry per moment 1..horizon");
  StoppingProfile prof(*spec.horizon, spec.players(), labels.size());
  for (std::size_t n = 0; n < stages->size(); ++n) {
    const auto* players = stages->get(n)->as_array();
    if (!players || players->size() != spec.players())
      throw ConfigError(v.name(), "profile", "each moment needs one state list per player");
    for (std::size_t i = 0; i < players->size(); ++i) {
      const auto* set = players->get(i)->as_array();
      if (!set) throw ConfigError(v.name(), "profile", "stop sets must be arrays of state labels");
      for (const auto& s : *set) {
        auto label = s.value<std::string>();
        if (!label) throw ConfigError(v.name(), "profile", "stop sets must be arrays of state labels");
        prof.set(n + 1, i, state_index(labels, *label, v, "profile"), true);
      }
    }
  }
  return prof;
}

inline int cmd_verify(const CommonOptions& opt, const std::string& method, std::ostream& out, std::ostream& err) {
  const Config cfg = Config::load(opt.config);
  GameSpec spec = read_game_spec(cfg);
  if (opt.horizon) spec.horizon = parse_horizon(*opt.horizon);
  if (!spec.horizon) throw ValidationError("verify needs a finite horizon");
  const Section v = cfg.section("verify", false);
  const double tol = opt.tol.value_or(v.number_or("tol", 1e-9));
  const StoppingProfile profile = v.has("profile") ? read_profile(v, spec) : solve_finite(spec).profile;
  const auto& labels = spec.chain.labels();
  std::vector<std::size_t> starts;
  if (v.has("x0"))
    starts.push_back(state_index(labels, v.string("x0"), v, "x0"));
  else
    for (std::size_t x = 0; x < labels.size(); ++x) starts.push_back(x);
  const DeviationMethod m = method == "exhaustive" ? DeviationMethod::kExhaustive : DeviationMethod::kBestResponse;

  double worst = 0.0;
  std::vector<std::pair<std::size_t, DeviationReport>> reports;
  for (std::size_t x0 : starts) {
    reports.emplace_back(x0, deviation_gap(spec, profile, x0, m));
    worst = std::max(worst, reports.back().second.max_gap());
  }
  const bool equilibrium = worst <= tol;

  Output o(opt.out, out);
  if (opt.fmt() == Format::kCsv) {
    CsvWriter csv(o.stream());
    csv.header({"x0", "player", "profile_payoff", "best_payoff", "gap"});
    for (const auto& [x0, r] : reports)
      for (std::size_t i = 0; i < r.gap.size(); ++i)
        csv.row({labels[x0], std::to_string(i + 1), format_double(r.profile_payoff[i]),
                 format_double(r.best_payoff[i]), format_double(r.gap[i])});
  } else {
    json rows = json::array();
    for (const auto& [x0, r] : reports)
      for (std::size_t i = 0; i < r.gap.size(); ++i)
        rows.push_back({{"x0", labels[x0]},
                        {"player", i + 1},
                        {"profile_payoff", r.profile_payoff[i]},
                        {"best_payoff", r.best_payoff[i]},
                        {"gap", r.gap[i]}});
    json doc = {{"command", "verify"}, {"horizon", *spec.horizon}, {"method", method},
                {"tolerance", tol},    {"max_gap", worst},          {"equilibrium", equilibrium},
                {"gaps", rows}};
    o.stream() << doc.dump(2) << '\n';
  }
  o.flush();
  if (!equilibrium) {
    err << "error: profile is not an equilibrium, max unilateral gain " << format_double(worst) << " > "
        << format_double(tol) << '\n';
    return kNumerical;
  }
  return kOk;
}

// -------------------------------------------------------------- solve-dynkin

inline int cmd_solve_dynkin(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
  const Config cfg = Config::load(opt.config);
  const MarkovChain chain = read_chain(cfg.section("chain"));
  const Section d = cfg.section("dynkin");
  const PayoffTriple triple = read_payoff_triple(d, chain.size());
  std::size_t horizon = d.count_or("horizon", 1);
  if (opt.horizon) {
    const auto h = parse_horizon(*opt.horizon);
    if (!h) throw ValidationError("solve-dynkin supports finite horizons only");
    horizon = *h;
  }
  const NeveuCheck neveu = check_neveu(triple);
  if (!neveu.ordered)
    err << "note: payoffs are not ordered X <= W <= Y (first violation at state " << chain.label(*neveu.witness)
        << "); randomized stopping may be required\n";
  const DynkinSolution sol = solve_finite_dynkin(chain, triple, horizon);
  const auto& labels = chain.labels();

  Output o(opt.out, out);
  if (opt.fmt() == Format::kCsv) {
    CsvWriter csv(o.stream());
    csv.header({"steps_to_go", "state", "value", "p1_stop_prob", "p2_stop_prob"});
    for (std::size_t n = 0; n <= horizon; ++n)
      for (std::size_t x = 0; x < labels.size(); ++x)
        csv.row({std::to_string(n), labels[x], format_double(sol.value[n][x]), format_double(sol.stop_prob[n][0][x]),
                 format_double(sol.stop_prob[n][1][x])});
  } else {
    json rows = json::array();
    for (std::size_t n = 0; n <= horizon; ++n)
      for (std::size_t x = 0; x < labels.size(); ++x)
        rows.push_back({{"steps_to_go", n},
                        {"state", labels[x]},
                        {"value", sol.value[n][x]},
                        {"p1_stop_prob", sol.stop_prob[n][0][x]},
                        {"p2_stop_prob", sol.stop_prob[n][1][x]},
                        {"pure", sol.pure[n][x] != 0}});
    json doc = {{"command", "solve-dynkin"},
                {"horizon", horizon},
                {"states", labels},
                {"neveu_ordered", neveu.ordered},
                {"neveu_witness", neveu.witness ? json(labels[*neveu.witness]) : json(nullptr)},
                {"values", rows}};
    o.stream() << doc.dump(2) << '\n';
  }
  o.flush();
  return kOk;
}

// -------------------------------------------------------------------- detect

inline int cmd_detect(const CommonOptions& opt, std::ostream& out, std::ostream&) {
  const Config cfg = Config::load(opt.config);
  const Section d = cfg.section("disorder");
  const Section mc = cfg.section("mc", false);
  const DisorderModel model = read_disorder_model(d);
  const std::size_t grid = d.count_or("grid", 21);
  std::size_t horizon = d.count_or("horizon", 30);
  if (opt.horizon) {
    const auto h = parse_horizon(*opt.horizon);
    if (!h || *h < 1) throw ValidationError("detect needs a finite horizon >= 1");
    horizon = *h;
  }
  const std::size_t reps = mc.count_or("reps", 10000);
  const std::uint64_t seed = opt.seed.value_or(static_cast<std::uint64_t>(mc.count_or("seed", 1)));

  const NetSpec net{{model}, SimpleGame::dictator(1, 1), grid, horizon};
  const NetSolution sol = solve_net(net);
  const DetectionChain& dc = sol.game.channels.front();
  const double dp_value = sol.equilibrium.value(0, horizon)[dc.initial_state()];

  struct Row {
    std::string name;
    McEstimate est;
  };
  std::vector<Row> rows;
  if (reps > 0) {
    const PosteriorPolicy equilibrium = [&](std::size_t n, const PosteriorState& s) {
      return sol.equilibrium.profile.stops(n, 0, dc.locate(s));
    };
    rows.push_back({"equilibrium", evaluate_policy_mc(model, equilibrium, horizon, reps, seed)});
    rows.push_back({"stop-at-1", evaluate_policy_mc(
                                     model, [](std::size_t, const PosteriorState&) { return true; }, horizon, reps,
                                     seed)});
    if (d.has("threshold")) {
      const double thr = d.number("threshold");
      rows.push_back({"threshold", evaluate_policy_mc(
                                       model, [thr](std::size_t, const PosteriorState& s) { return s.total >= thr; },
                                       horizon, reps, seed)});
    }
  }

  Output o(opt.out, out);
  if (opt.fmt() == Format::kCsv) {
    CsvWriter csv(o.stream());
    csv.header({"policy", "reps", "estimate", "stderr"});
    csv.row({"dp-value", "0", format_double(dp_value), "0"});
    for (const Row& r : rows)
      csv.row({r.name, std::to_string(r.est.reps), format_double(r.est.estimate), format_double(r.est.std_error)});
  } else {
    json policies = json::array();
    for (const Row& r : rows)
      policies.push_back({{"policy", r.name},
                          {"reps", r.est.reps},
                          {"estimate", r.est.estimate},
                          {"stderr", r.est.std_error},
                          {"mean_window_payoff", r.est.payoff_mean}});
    json doc = {{"command", "detect"},       {"grid", grid},   {"horizon", horizon},
                {"chain_states", dc.size()}, {"seed", seed},   {"dp_value", dp_value},
                {"policies", policies}};
    o.stream() << doc.dump(2) << '\n';
  }
  o.flush();
  return kOk;
}

// -------------------------------------------------------------- simulate-net

inline json net_report_json(const NetReport& r) {
  json sensors = json::array();
  for (std::size_t i = 0; i < r.dp_values.size(); ++i) {
    json s = {{"sensor", i + 1}, {"dp_value", r.dp_values[i]}};
    if (r.has_mc) {
      s["detection_frequency"] = r.detection_frequency[i];
      s["stderr"] = r.detection_std_error[i];
    }
    sensors.push_back(s);
  }
  json doc = {{"command", "simulate-net"},
              {"chain_states", r.chain_states},
              {"horizon", r.horizon},
              {"sensors", sensors}};
  if (r.has_mc) {
    json hist = json::array();
    for (std::size_t n = 1; n < r.stop_time_counts.size(); ++n)
      hist.push_back({{"moment", n}, {"count", r.stop_time_counts[n]}});
    doc["mc"] = {{"reps", r.mc_reps}, {"mean_stop_time", r.mean_stop_time}, {"stop_time_histogram", hist}};
  }
  return doc;
}

inline int cmd_simulate_net(const CommonOptions& opt, std::ostream& out, std::ostream&) {
  const Config cfg = Config::load(opt.config);
  NetSpec net = read_net_spec(cfg);
  if (opt.horizon) {
    const auto h = parse_horizon(*opt.horizon);
    if (!h || *h < 1) throw ValidationError("simulate-net needs a finite horizon >= 1");
    net.horizon = *h;
  }
  const Section mc = cfg.section("mc", false);
  const std::size_t reps = mc.count_or("reps", 10000);
  const std::uint64_t seed = opt.seed.value_or(static_cast<std::uint64_t>(mc.count_or("seed", 1)));
  const NetReport r = run_pipeline(net, reps, seed);

  Output o(opt.out, out);
  if (opt.fmt() == Format::kJson) {
    o.stream() << net_report_json(r).dump(2) << '\n';
    o.flush();
    return kOk;
  }
  CsvWriter csv(o.stream());
  csv.header({"sensor", "dp_value", "mc_reps", "detection_frequency", "stderr"});
  for (std::size_t i = 0; i < r.dp_values.size(); ++i)
    csv.row({std::to_string(i + 1), format_double(r.dp_values[i]), std::to_string(r.mc_reps),
             r.has_mc ? format_double(r.detection_frequency[i]) : "",
             r.has_mc ? format_double(r.detection_std_error[i]) : ""});
  if (r.has_mc) {
    // Second table: alongside the output file, or after a blank line on stdout.
    std::ostringstream hist;
    CsvWriter h(hist);
    h.header({"moment", "count"});
    for (std::size_t n = 1; n < r.stop_time_counts.size(); ++n)
      h.row({std::to_string(n), std::to_string(r.stop_time_counts[n])});
    if (o.path().empty()) {
      o.stream() << '\n' << hist.str();
    } else {
      std::string path = o.path();
      const auto dot = path.rfind('.');
      path = (dot == std::string::npos ? path : path.substr(0, dot)) + "_stop_times.csv";
      std::ofstream f(path, std::ios::binary);
      if (!f) throw ValidationError("cannot open output file " + path);
      f << hist.str();
    }
  }
  o.flush();
  return kOk;
}

// ---------------------------------------------------------------------- main

/// Parses argv, runs one subcommand, and returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Solvers and simulators for voting stopping games, Dynkin games and sensor-net disorder detection"};
  app.require_subcommand(1);
  CommonOptions opt;
  std::string method = "best-response";

  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("-c,--config", opt.config, "TOML configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opt.out, "output file (default: stdout)");
    sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--horizon", opt.horizon, "override the horizon (integer, or 'inf' where supported)");
    sub->add_option("--tol", opt.tol, "convergence / certificate tolerance");
    if (with_seed) sub->add_option("--seed", opt.seed, "master seed for Monte Carlo streams");
  };

  auto* solve_game = app.add_subcommand("solve-game", "equilibrium values and stopping sets of a voting stopping game");
  add_common(solve_game, false);
  auto* verify = app.add_subcommand("verify", "maximal unilateral gain against a stopping profile");
  add_common(verify, false);
  verify->add_option("--method", method, "deviation search")->check(CLI::IsMember({"best-response", "exhaustive"}));
  auto* dynkin = app.add_subcommand("solve-dynkin", "finite-horizon zero-sum Dynkin game with randomized stopping");
  add_common(dynkin, false);
  auto* detect = app.add_subcommand("detect", "single-sensor disorder detection: grid DP plus Monte Carlo");
  add_common(detect, true);
  auto* net = app.add_subcommand("simulate-net", "sensor network fused by a simple game: solve and simulate");
  add_common(net, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*solve_game) return cmd_solve_game(opt, out, err);
    if (*verify) return cmd_verify(opt, method, out, err);
    if (*dynkin) return cmd_solve_dynkin(opt, out, err);
    if (*detect) return cmd_detect(opt, out, err);
    if (*net) return cmd_simulate_net(opt, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kValidation;
}

}  // namespace stopgame::cli
