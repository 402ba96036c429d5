#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace pgm {

/// SplitMix64 stream: the state is a counter advanced by a fixed odd increment,
/// so a seed fully determines every draw on every platform.
class RandomSource {
 public:
  using result_type = std::uint64_t;

  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  std::uint64_t next();

  std::uint64_t seed() const noexcept { return seed_; }
  /// Independent stream for a numbered sub-task (chain id, restart index).
  RandomSource split(std::uint64_t stream) const;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Index drawn proportionally to nonnegative weights (need not sum to one).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace pgm
