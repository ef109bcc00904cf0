#pragma once

#include <cstdint>
#include <random>

namespace locabc {

/// Engine used for every stochastic component.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Named sub-streams derived from a master seed.
enum class Stream : std::uint64_t {
  table = 1,
  test_data = 2,
  cv_folds = 3,
  retry = 4,
};

/// seed(master, stream, index) = splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
///
/// Simulation i of a table uses derive_seed(master, Stream::table, i), so a
/// table is identical however its rows are split across workers.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

/// Uniform draw on the open interval (0, 1) with 53 random bits.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) without modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = rng();
  while (x >= limit) {
    x = rng();
  }
  return x % bound;
}

}  // namespace locabc
