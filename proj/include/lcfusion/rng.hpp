#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace lcfusion {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// SplitMix64 stream; satisfies UniformRandomBitGenerator. Cheap to construct,
// so one engine per (seed, counter) key gives order-independent draws.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline SplitMix64 keyed_engine(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream = 0) noexcept {
  return SplitMix64(splitmix64(seed ^ splitmix64(counter ^ splitmix64(stream + 0x5bd1e995ULL))));
}

// Uniform in [0, 1) with 53 random bits.
template <typename Engine>
double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection, so results do not depend on the
// standard library's distribution implementation.
template <typename Engine>
std::size_t uniform_index(Engine& engine, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

// First `count` entries of a seeded Fisher-Yates shuffle of `pool`.
template <typename T, typename Engine>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t count, Engine& engine) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(engine, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace lcfusion
