#ifndef PARENA_RNG_HPP_
#define PARENA_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>

namespace parena {

// Named sub-streams derived per round, so randomness consumed by one
// component (e.g. adjudication) never shifts the draws of another.
enum class Stream : std::uint64_t {
  kQuery = 1,
  kSubset = 2,
  kAdjudication = 3,
  kShuffle = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round, Stream stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ round) ^ static_cast<std::uint64_t>(stream));
}

// mt19937_64 with bounded-integer and unit-interval draws defined here
// rather than by <random> distributions, whose output is
// implementation-specific. Same seed gives the same sequence on every
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_round(std::uint64_t seed, std::uint64_t round, Stream stream) {
    return Rng(derive_seed(seed, round, stream));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace parena

#endif  // PARENA_RNG_HPP_
