#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace scanstat {

// mt19937_64 has a fully specified output sequence; the variates drawn from it
// come from Boost.Random distributions, whose algorithms are fixed in source,
// so a given seed yields the same numbers on every platform.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a sub-stream identified by a path of integers (replicate index,
// iteration, ...). Independent of evaluation order, so parallel and serial
// runs draw identical numbers.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return make_rng(derive_seed(master, path));
}

}  // namespace scanstat
