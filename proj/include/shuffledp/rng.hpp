#pragma once

#include <cstdint>
#include <random>

namespace shuffledp {

// splitmix64 finalizer. Used to derive independent-looking substream seeds
// from (master seed, index...) tuples; the chain is fixed so that every
// experiment is reproducible from a single 64-bit seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a derived substream. Successive salts walk the splitmix sequence,
// so (seed, a) and (seed, b) give unrelated streams for a != b.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Thin wrapper over mt19937_64: one standard-specified stream plus the two
// primitive draws everything else is built from. Doubles use the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Multiply-shift bounded draw; the bias is
  // O(n / 2^64) which is far below anything our statistical tests resolve.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace shuffledp
