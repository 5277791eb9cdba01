#ifndef VIBOUND_RANDOM_HPP
#define VIBOUND_RANDOM_HPP

#include <cstdint>
#include <limits>

namespace vibound {

/// Mixes a 64-bit value (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/**
 * Splittable xoshiro256** generator.
 *
 * A generator is fully determined by (seed, stream); draws for stream i never
 * depend on how many other streams were consumed or on which thread ran them.
 * Satisfies UniformRandomBitGenerator so it can drive <random> distributions.
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Chi-square with `df` degrees of freedom (df > 0).
  double chi_square(double df);

 private:
  std::uint64_t s_[4];
};

}  // namespace vibound

#endif
