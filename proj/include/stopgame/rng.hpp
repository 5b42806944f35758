#pragma once

#include <cstdint>
#include <random>

namespace stopgame {

/// SplitMix64 finaliser; used only to derive engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One reproducible random stream. The output sequence of std::mt19937_64 is
/// fixed by the standard and the uniform mapping below is explicit, so a
/// (master seed, index) pair yields the same numbers on every toolchain.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Stream for replication `index` of a run seeded with `master`.
  static RandomStream derive(std::uint64_t master, std::uint64_t index) {
    return RandomStream(splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stopgame
