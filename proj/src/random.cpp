#include "pgm/random.hpp"

#include <cmath>

#include "pgm/error.hpp"

namespace pgm {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RandomSource::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix(state_);
}

RandomSource RandomSource::split(std::uint64_t stream) const {
  return RandomSource(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL)));
}

double RandomSource::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t RandomSource::below(std::uint64_t n) {
  if (n == 0) fail(Errc::argument, "RandomSource::below needs a positive bound");
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do x = next();
  while (x >= limit);
  return x % n;
}

std::size_t RandomSource::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(Errc::argument, "categorical weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) fail(Errc::degenerate_distribution, "categorical weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace pgm
