#pragma once

// Reproducible random streams: every (seed, stream, substream) triple names an
// independent generator; there is no global RNG state.

#include <cmath>
#include <cstdint>
#include <random>

#include "kcmlab/lattice.hpp"

namespace kcmlab {

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),    static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// Exponential with the given rate.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double prob) { return uniform() < prob; }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Product measure on the region: each site empty (0) with probability q.
inline std::vector<std::uint8_t> sample_bits(std::size_t n, double q, RandomStream& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng.bernoulli(q) ? 0 : 1;
  return bits;
}

inline Configuration sample_bernoulli(const Region& region, double q, std::uint64_t seed, std::uint64_t stream,
                                      Exterior exterior = AllHealthy{}) {
  if (!(q >= 0.0 && q <= 1.0)) throw Error("q must lie in [0, 1]");
  RandomStream rng(seed, stream);
  return Configuration(region, sample_bits(region.size(), q, rng), std::move(exterior));
}

}  // namespace kcmlab
