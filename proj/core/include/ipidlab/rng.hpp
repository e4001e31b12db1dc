#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ipidlab {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact by the
// standard); the reductions below are written out by hand because the standard
// distributions are allowed to differ between library implementations, and traces
// produced from a seed have to be reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_() >> 32); }

  // Uniform value in [0, bound). bound == 0 yields 0 ("random(0) = 0" in the
  // generators that call this). Multiply-shift reduction; the bias for the bounds
  // used here (<= 2^32) is below 2^-32 and irrelevant to every consumer.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) return 0;
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  std::uint32_t below_u32(std::uint32_t bound) {
    return static_cast<std::uint32_t>(below(bound));
  }

  // k low-entropy bits, k <= 64.
  std::uint64_t bits(unsigned k) {
    if (k == 0) return 0;
    return next_u64() >> (64 - k);
  }

  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return unit() < p;
  }

  // Uniform double in [0, 1) with 53 bits.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller, spare value cached.
  double normal(double mean, double sigma) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = unit();
    } while (u1 <= 0.0);
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + sigma * r * std::cos(theta);
  }

  // Independent child stream; tag keeps subsystems (device init, network noise,
  // plan generation, ...) from sharing a sequence even under one session seed.
  Rng fork(std::uint64_t tag) const {
    // splitmix64 over (base seed, tag); good enough to decorrelate streams.
    std::uint64_t z = seed_mix_ + tag * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_mix_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ipidlab
