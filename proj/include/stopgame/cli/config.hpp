#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stopgame/disorder.hpp"
#include "stopgame/dynkin_game.hpp"
#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/sensor_net.hpp"
#include "stopgame/simple_game.hpp"
#include "stopgame/voting_game.hpp"
#include "toml.hpp"

namespace stopgame::cli {

/// Invalid or missing configuration; the message names "[section] key".
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string_view section, std::string_view key, const std::string& what)
      : ValidationError("[" + std::string(section) + "] " + std::string(key) + ": " + what) {}
};

/// Thin accessor over one TOML table that reports errors with section + key.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  bool has(std::string_view key) const { return table_ && table_->contains(key); }

  const toml::node& node(std::string_view key) const {
    if (!has(key)) throw ConfigError(name_, key, "missing");
    return *table_->get(key);
  }

  double number(std::string_view key) const {
    const auto& n = node(key);
    if (auto v = n.value<double>()) return *v;
    throw ConfigError(name_, key, "expected a number");
  }

  double number_or(std::string_view key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(std::string_view key) const {
    const auto& n = node(key);
    if (n.is_integer()) return *n.value<std::int64_t>();
    throw ConfigError(name_, key, "expected an integer");
  }

  std::size_t count(std::string_view key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError(name_, key, "must be non-negative");
    return static_cast<std::size_t>(v);
  }

  std::size_t count_or(std::string_view key, std::size_t fallback) const { return has(key) ? count(key) : fallback; }

  std::string string(std::string_view key) const {
    const auto& n = node(key);
    if (auto v = n.value<std::string>()) return *v;
    throw ConfigError(name_, key, "expected a string");
  }

  bool boolean(std::string_view key) const {
    const auto& n = node(key);
    if (auto v = n.value<bool>()) return *v;
    throw ConfigError(name_, key, "expected true or false");
  }

  std::vector<double> vector(std::string_view key) const { return to_vector(node(key), key); }

  std::vector<std::vector<double>> matrix(std::string_view key) const {
    const auto* arr = node(key).as_array();
    if (!arr) throw ConfigError(name_, key, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (const auto& row : *arr) out.push_back(to_vector(row, key));
    return out;
  }

  std::vector<std::string> strings(std::string_view key) const {
    const auto* arr = node(key).as_array();
    if (!arr) throw ConfigError(name_, key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& v : *arr) {
      auto s = v.value<std::string>();
      if (!s) throw ConfigError(name_, key, "expected an array of strings");
      out.push_back(*s);
    }
    return out;
  }

  std::vector<std::vector<int>> int_lists(std::string_view key) const {
    const auto* arr = node(key).as_array();
    if (!arr) throw ConfigError(name_, key, "expected an array of integer arrays");
    std::vector<std::vector<int>> out;
    for (const auto& row : *arr) {
      const auto* inner = row.as_array();
      if (!inner) throw ConfigError(name_, key, "expected an array of integer arrays");
      std::vector<int> r;
      for (const auto& v : *inner) {
        if (!v.is_integer()) throw ConfigError(name_, key, "expected integer player labels");
        r.push_back(static_cast<int>(*v.value<std::int64_t>()));
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  Section child(std::string_view key) const {
    const toml::table* t = has(key) ? table_->get(key)->as_table() : nullptr;
    if (has(key) && !t) throw ConfigError(name_, key, "expected a table");
    return Section(t, name_ + "." + std::string(key));
  }

  bool present() const { return table_ != nullptr; }
  const toml::table* table() const { return table_; }

 private:
  std::vector<double> to_vector(const toml::node& n, std::string_view key) const {
    const auto* arr = n.as_array();
    if (!arr) throw ConfigError(name_, key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : *arr) {
      auto d = v.value<double>();
      if (!d) throw ConfigError(name_, key, "expected an array of numbers");
      out.push_back(*d);
    }
    return out;
  }

  const toml::table* table_;
  std::string name_;
};

class Config {
 public:
  static Config parse(std::string_view text, std::string source = "config") {
    try {
      return Config(toml::parse(text, source));
    } catch (const toml::parse_error& e) {
      throw ValidationError(source + ": TOML parse error: " + std::string(e.description()));
    }
  }

  static Config load(const std::string& path) {
    try {
      return Config(toml::parse_file(path));
    } catch (const toml::parse_error& e) {
      throw ValidationError(path + ": " + std::string(e.description()));
    }
  }

  Section section(std::string_view name, bool required = true) const {
    const toml::table* t = nullptr;
    if (auto* n = root_.get(name)) {
      t = n->as_table();
      if (!t) throw ConfigError(name, "", "expected a table");
    }
    if (!t && required) throw ConfigError(name, "", "section missing");
    return Section(t, std::string(name));
  }

  const toml::table& root() const { return root_; }

 private:
  explicit Config(toml::table root) : root_(std::move(root)) {}
  toml::table root_;
};

inline MarkovChain read_chain(const Section& s) {
  const auto matrix = s.matrix("transition");
  std::vector<std::string> labels = s.has("states") ? s.strings("states") : MarkovChain::default_labels(matrix.size());
  try {
    return MarkovChain::validate(std::move(labels), matrix);
  } catch (const ValidationError& e) {
    throw ConfigError(s.name(), "transition", e.what());
  }
}

inline std::size_t state_index(const std::vector<std::string>& labels, const std::string& label,
                               const Section& s, std::string_view key) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  throw ConfigError(s.name(), key, "unknown state '" + label + "'");
}

/// Simple game from one of: majority = r, unanimity = true, dictator = i,
/// winning = [[..]] (explicit monotone family), minimal_winning = [[..]].
inline SimpleGame read_simple_game(const Section& s, std::size_t players) {
  auto coalitions = [&](std::string_view key) {
    std::vector<Coalition> out;
    for (const auto& c : s.int_lists(key)) {
      for (int i : c)
        if (i < 1 || static_cast<std::size_t>(i) > players)
          throw ConfigError(s.name(), key, "player " + std::to_string(i) + " outside 1.." + std::to_string(players));
      out.push_back(make_coalition(c));
    }
    return out;
  };
  int forms = 0;
  for (auto k : {"majority", "unanimity", "dictator", "winning", "minimal_winning"}) forms += s.has(k) ? 1 : 0;
  if (forms != 1)
    throw ConfigError(s.name(), "majority|unanimity|dictator|winning|minimal_winning",
                      "exactly one aggregation rule must be given");
  try {
    if (s.has("majority")) return SimpleGame::majority(players, s.count("majority"));
    if (s.has("unanimity")) {
      if (!s.boolean("unanimity")) throw ConfigError(s.name(), "unanimity", "must be true when present");
      return SimpleGame::unanimity(players);
    }
    if (s.has("dictator")) return SimpleGame::dictator(players, s.count("dictator"));
    if (s.has("winning")) return SimpleGame::validate(players, coalitions("winning"));
    return SimpleGame::from_minimal(players, coalitions("minimal_winning"));
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(s.name(), "aggregation rule", e.what());
  }
}

/// Horizon value: a non-negative integer or the string "inf".
inline std::optional<std::size_t> parse_horizon(std::string_view text) {
  if (text == "inf" || text == "infinite") return std::nullopt;
  std::size_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValidationError("horizon must be a non-negative integer or 'inf', got '" + std::string(text) + "'");
  return value;
}

inline std::optional<std::size_t> read_horizon(const Section& s) {
  const auto& n = s.node("horizon");
  if (n.is_integer()) return s.count("horizon");
  if (auto str = n.value<std::string>()) {
    try {
      return parse_horizon(*str);
    } catch (const ValidationError& e) {
      throw ConfigError(s.name(), "horizon", e.what());
    }
  }
  throw ConfigError(s.name(), "horizon", "expected an integer or \"inf\"");
}

inline GameSpec read_game_spec(const Config& cfg) {
  const MarkovChain chain = read_chain(cfg.section("chain"));
  const Section g = cfg.section("game");
  const auto utilities = g.matrix("utilities");
  if (utilities.empty()) throw ConfigError(g.name(), "utilities", "at least one player is required");
  if (g.has("players") && g.count("players") != utilities.size())
    throw ConfigError(g.name(), "players", "does not match the number of utility rows");
  GameSpec spec{chain, utilities, read_simple_game(g, utilities.size()),
                g.has("horizon") ? read_horizon(g) : std::optional<std::size_t>{0}};
  try {
    spec.check();
  } catch (const ValidationError& e) {
    throw ConfigError(g.name(), "utilities", e.what());
  }
  return spec;
}

inline PayoffTriple read_payoff_triple(const Section& s, std::size_t states) {
  PayoffTriple t{s.vector("first"), s.vector("both"), s.vector("second")};
  try {
    t.check(states);
  } catch (const ValidationError& e) {
    throw ConfigError(s.name(), "first|both|second", e.what());
  }
  return t;
}

inline DisorderModel read_disorder_model(const Section& s) {
  const auto alphabet = s.strings("alphabet");
  const std::size_t x0 = s.has("x0") ? state_index(alphabet, s.string("x0"), s, "x0") : 0;
  try {
    return DisorderModel::validate(alphabet, s.matrix("pre_change"), s.matrix("post_change"), s.number("q"),
                                   s.count_or("window", 0), x0);
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(s.name(), "pre_change|post_change|q", e.what());
  }
}

inline NetSpec read_net_spec(const Config& cfg) {
  const Section net = cfg.section("net");
  const auto* arr = net.has("sensor") ? net.node("sensor").as_array() : nullptr;
  if (!arr || arr->empty()) throw ConfigError(net.name(), "sensor", "expected one or more [[net.sensor]] tables");
  NetSpec spec{{}, SimpleGame::majority(1, 1), net.count_or("grid", 11), net.count_or("horizon", 20)};
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto* t = arr->get(i)->as_table();
    if (!t) throw ConfigError(net.name(), "sensor", "entries must be tables");
    spec.sensors.push_back(read_disorder_model(Section(t, "net.sensor." + std::to_string(i + 1))));
  }
  spec.fusion = read_simple_game(net.child("fusion"), spec.sensors.size());
  return spec;
}

}  // namespace stopgame::cli
