#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace noisyerm {

/// Every random draw in the library comes from an mt19937_64 stream whose
/// seed is a splitmix64 hash of (master seed, tag path). Streams are never
/// shared between tasks, so results do not depend on scheduling.
using Rng = std::mt19937_64;

/// Purpose tags keep streams for different roles disjoint even when the
/// numeric indices coincide.
enum class StreamTag : std::uint64_t {
  features = 0x6665617475726573ULL,
  labels = 0x6c6162656c73ULL,
  corruption = 0x636f7272757074ULL,
  replace = 0x7265706c616365ULL,
  sign = 0x7369676eULL,
  directions = 0x64697273ULL,
  population = 0x706f70ULL,
  test_sample = 0x74657374ULL,
  saa_sample = 0x736161ULL,
  trial = 0x747269616cULL,
  resample = 0x726573616d70ULL,
  reference = 0x726566ULL,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a path of integers into a 64-bit seed. Order matters.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                           std::initializer_list<std::uint64_t> path = {}) noexcept {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(tag)});
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, StreamTag tag, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(master, tag, path));
}

}  // namespace noisyerm
