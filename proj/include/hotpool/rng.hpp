#pragma once

#include <cstdint>
#include <random>

namespace hotpool {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used to derive
/// independent per-run seeds from a single master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-run seed: splitmix64(master ^ splitmix64(run_index)).
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t run_index) {
  return splitmix64(master ^ splitmix64(run_index));
}

/// The scheduler's PRNG: 64-bit Mersenne Twister (std::mt19937_64), whose
/// output sequence is fixed by the C++ standard. Index selection uses
/// Lemire's multiply-shift so results do not depend on the standard
/// library's distribution implementations.
class SchedulerRng {
 public:
  explicit SchedulerRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform index in [0, n); n must be positive.
  std::size_t pick(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::size_t>(m >> 64);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hotpool
