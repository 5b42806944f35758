#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stopgame/errors.hpp"

namespace stopgame {

/// Set of players encoded as a bitmask; bit i-1 is player i.
using Coalition = std::uint32_t;

inline constexpr std::size_t kMaxPlayers = 16;

/// Renders a coalition with 1-based player labels, e.g. "{1,3}".
inline std::string coalition_to_string(Coalition c) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (std::size_t i = 0; i < 32; ++i) {
    if (c & (Coalition{1} << i)) {
      if (!first) os << ',';
      os << i + 1;
      first = false;
    }
  }
  os << '}';
  return os.str();
}

/// Builds a coalition from 1-based player labels.
inline Coalition make_coalition(std::span<const int> players) {
  Coalition c = 0;
  for (int i : players) c |= Coalition{1} << (i - 1);
  return c;
}

inline Coalition make_coalition(std::initializer_list<int> players) {
  return make_coalition(std::span<const int>(players.begin(), players.size()));
}

/// Declarations x_1..x_p of the players; 1 means "stop".
class VoteVector {
 public:
  VoteVector() = default;
  explicit VoteVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}
  VoteVector(std::initializer_list<int> bits) {
    for (int b : bits) bits_.push_back(b != 0 ? 1 : 0);
  }

  static VoteVector from_coalition(Coalition yes, std::size_t p) {
    std::vector<std::uint8_t> bits(p);
    for (std::size_t i = 0; i < p; ++i) bits[i] = (yes >> i) & 1U;
    return VoteVector(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  /// The yes-voter coalition.
  Coalition yes_set() const {
    Coalition c = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) c |= Coalition{1} << i;
    return c;
  }

 private:
  std::vector<std::uint8_t> bits_;
};

/// A simple game on p players: the family of winning coalitions W.
///
/// After construction W is closed under supersets, contains the grand
/// coalition and excludes the empty one. Immutable.
class SimpleGame {
 public:
  /// Checks the three axioms on an explicit family. The family must already be
  /// monotone; a superset of a winning coalition that is missing from the
  /// family is reported as a MonotonicityViolation.
  static SimpleGame validate(std::size_t p, std::span<const Coalition> winning) {
    check_player_count(p);
    const Coalition full = full_mask(p);
    std::vector<std::uint8_t> table(std::size_t{1} << p, 0);
    for (Coalition c : winning) {
      if (c & ~full)
        throw ValidationError("coalition " + coalition_to_string(c) + " names a player outside 1.." +
                              std::to_string(p));
      table[c] = 1;
    }
    if (table[0]) throw EmptyCoalitionWinning("the empty coalition must be losing");
    // Adding a single player suffices: any S subset T chain passes through
    // one-player extensions, so the first failing edge is a witness.
    for (Coalition s = 0; s <= full; ++s) {
      if (!table[s]) continue;
      for (std::size_t i = 0; i < p; ++i) {
        const Coalition t = s | (Coalition{1} << i);
        if (t != s && !table[t]) {
          throw MonotonicityViolation(s, t,
                                      "winning family is not monotone: " + coalition_to_string(s) +
                                          " wins but its superset " + coalition_to_string(t) + " loses");
        }
      }
    }
    if (!table[full]) throw GrandCoalitionLosing("the grand coalition must be winning");
    return SimpleGame(p, std::move(table));
  }

  static SimpleGame validate(std::size_t p, std::initializer_list<Coalition> winning) {
    return validate(p, std::span<const Coalition>(winning.begin(), winning.size()));
  }

  /// Game whose winning coalitions are the supersets of the given ones.
  static SimpleGame from_minimal(std::size_t p, std::span<const Coalition> minimal) {
    check_player_count(p);
    const Coalition full = full_mask(p);
    std::vector<std::uint8_t> table(std::size_t{1} << p, 0);
    for (Coalition m : minimal) {
      if (m & ~full)
        throw ValidationError("coalition " + coalition_to_string(m) + " names a player outside 1.." +
                              std::to_string(p));
      if (m == 0) throw EmptyCoalitionWinning("the empty coalition must be losing");
      table[m] = 1;
    }
    for (Coalition s = 0; s <= full; ++s) {
      if (!table[s]) continue;
      for (std::size_t i = 0; i < p; ++i) table[s | (Coalition{1} << i)] = 1;
    }
    if (!table[full]) throw GrandCoalitionLosing("the grand coalition must be winning");
    return SimpleGame(p, std::move(table));
  }

  static SimpleGame from_minimal(std::size_t p, std::initializer_list<Coalition> minimal) {
    return from_minimal(p, std::span<const Coalition>(minimal.begin(), minimal.size()));
  }

  /// Stop when at least r players declare stop.
  static SimpleGame majority(std::size_t p, std::size_t r) {
    check_player_count(p);
    if (r < 1 || r > p)
      throw ValidationError("majority level must satisfy 1 <= r <= p, got r=" + std::to_string(r));
    std::vector<std::uint8_t> table(std::size_t{1} << p, 0);
    for (Coalition s = 0; s <= full_mask(p); ++s)
      table[s] = static_cast<std::size_t>(std::popcount(s)) >= r ? 1 : 0;
    return SimpleGame(p, std::move(table));
  }

  static SimpleGame unanimity(std::size_t p) { return majority(p, p); }

  /// Player `i` (1-based) decides alone.
  static SimpleGame dictator(std::size_t p, std::size_t i) {
    if (i < 1 || i > p) throw ValidationError("dictator must be a player in 1..p");
    const Coalition d = Coalition{1} << (i - 1);
    return from_minimal(p, {d});
  }

  std::size_t players() const { return p_; }
  Coalition grand_coalition() const { return full_mask(p_); }

  bool is_winning(Coalition c) const { return table_[c & full_mask(p_)] != 0; }

  /// All winning coalitions in increasing bitmask order.
  std::vector<Coalition> winning_coalitions() const {
    std::vector<Coalition> out;
    for (Coalition s = 0; s <= full_mask(p_); ++s)
      if (table_[s]) out.push_back(s);
    return out;
  }

  /// Winning coalitions with no winning proper subset.
  std::vector<Coalition> minimal_winning() const {
    std::vector<Coalition> out;
    for (Coalition s = 0; s <= full_mask(p_); ++s) {
      if (!table_[s]) continue;
      bool minimal = true;
      for (std::size_t i = 0; i < p_ && minimal; ++i) {
        const Coalition bit = Coalition{1} << i;
        if ((s & bit) && table_[s & ~bit]) minimal = false;
      }
      if (minimal) out.push_back(s);
    }
    return out;
  }

  /// Same game on relabelled players: player i of this game becomes
  /// player perm[i] (0-based) of the result.
  SimpleGame permuted(std::span<const std::size_t> perm) const {
    std::vector<std::uint8_t> table(table_.size(), 0);
    for (Coalition s = 0; s <= full_mask(p_); ++s) {
      Coalition t = 0;
      for (std::size_t i = 0; i < p_; ++i)
        if (s & (Coalition{1} << i)) t |= Coalition{1} << perm[i];
      table[t] = table_[s];
    }
    return SimpleGame(p_, std::move(table));
  }

  friend bool operator==(const SimpleGame&, const SimpleGame&) = default;

 private:
  SimpleGame(std::size_t p, std::vector<std::uint8_t> table) : p_(p), table_(std::move(table)) {}

  static constexpr Coalition full_mask(std::size_t p) {
    return p >= 32 ? ~Coalition{0} : (Coalition{1} << p) - 1;
  }

  static void check_player_count(std::size_t p) {
    if (p < 1 || p > kMaxPlayers)
      throw ValidationError("player count must be in 1.." + std::to_string(kMaxPlayers) + ", got " +
                            std::to_string(p));
  }

  std::size_t p_ = 0;
  std::vector<std::uint8_t> table_;
};

/// Aggregated decision pi(x): 1 iff the yes-voters form a winning coalition.
inline bool aggregate(const SimpleGame& game, Coalition yes) { return game.is_winning(yes); }

inline void check_votes(const SimpleGame& game, const VoteVector& votes) {
  if (votes.size() != game.players())
    throw ValidationError("vote vector has " + std::to_string(votes.size()) + " entries for " +
                          std::to_string(game.players()) + " players");
}

inline bool aggregate(const SimpleGame& game, const VoteVector& votes) {
  check_votes(game, votes);
  return game.is_winning(votes.yes_set());
}

/// Literal sum over C in W of prod_{i in C} x_i prod_{i not in C} (1 - x_i).
/// Quadratic in the family size; kept as a cross-check for aggregate().
inline bool aggregate_sum_form(const SimpleGame& game, const VoteVector& votes) {
  check_votes(game, votes);
  int sum = 0;
  for (Coalition c : game.winning_coalitions()) {
    int term = 1;
    for (std::size_t i = 0; i < game.players(); ++i) {
      const int x = votes[i] ? 1 : 0;
      term *= (c & (Coalition{1} << i)) ? x : 1 - x;
    }
    sum += term;
  }
  return sum != 0;
}

}  // namespace stopgame
