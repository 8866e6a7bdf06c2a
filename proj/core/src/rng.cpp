#include "marlab/rng.hpp"

#include <limits>
#include <stdexcept>

namespace marlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  // Reject draws from the final partial block of size (2^64 mod n).
  const std::uint64_t rem = (kMax % n + 1) % n;
  std::uint64_t r = next_u64();
  while (rem != 0 && r > kMax - rem) r = next_u64();
  return r % n;
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag));
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty())
    throw std::invalid_argument("sample_categorical: empty distribution");
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  throw std::invalid_argument("sample_categorical: distribution has no mass");
}

}  // namespace marlab
