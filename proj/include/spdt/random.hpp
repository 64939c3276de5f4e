#pragma once

// Seeded, order-independent random streams.
//
// Every stochastic decision in the toolkit is drawn from a stream that is
// keyed by the master seed plus the identity of the thing being decided
// (node, day, replicate, ...). Two runs that share a key see the same draws
// regardless of iteration order or thread count.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace spdt {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a sequence of words into one key.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t k = mix64(seed);
  for (std::uint64_t p : parts) k = mix64(k ^ mix64(p + 0x632be59bd9b4e019ULL));
  return k;
}

// Counter-based generator: output i is mix64(key + i * golden). Cheap to
// construct, so one can be created per (node, day) without a cost concern.
// Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}
  constexpr Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept
      : key_(derive_key(seed, parts)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return mix64(key_ ^ (0xd1b54a32d192ed03ULL * ++counter_));
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Uniform double in [0, 1) with 53 random bits.
template <class Gen>
double uniform01(Gen& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
template <class Gen>
double uniform_real(Gen& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Unbiased integer in [0, n) by rejection. n must be > 0.
template <class Gen>
std::uint64_t uniform_index(Gen& g, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

template <class Gen>
bool bernoulli(Gen& g, double p) {
  return uniform01(g) < p;
}

// Number of failures before the first success, success probability p in (0,1].
template <class Gen>
std::uint64_t geometric_failures(Gen& g, double p) {
  if (p >= 1.0) return 0;
  const double u = 1.0 - uniform01(g);  // (0, 1]
  return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
}

}  // namespace spdt
