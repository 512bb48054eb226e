#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "crules/error.hpp"

namespace crules {

// Stateless mixer used for seed scrambling and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed plus up to three
// indices (e.g. base, graph index, purpose tag). Chaining splitmix64 keeps
// nearby seeds statistically unrelated.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(base ^ 0x5851f42d4c957f2dULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

// Deterministic RNG with portable distributions. The raw mt19937_64 output
// sequence is pinned by the standard, but std::uniform_*_distribution is
// implementation-defined, so every bounded draw is implemented here on top
// of raw 64-bit words (unbiased rejection sampling).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound). Rejection sampling: draw words until one lands in
  // the largest multiple of bound that fits in 64 bits.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw invalid_argument_error("Rng::below requires a positive bound");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t word = next_u64();
    while (word >= limit) word = next_u64();
    return word % bound;
  }

  // Uniform integer in [lo, hi] inclusive.
  long long range(long long lo, long long hi) {
    if (lo > hi) throw invalid_argument_error("Rng::range requires lo <= hi");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long long>(span == 0 ? next_u64() : below(span));
  }

  // Uniform double in [0, 1) with full 53-bit mantissa resolution.
  double real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return real01() < p; }

  // Uniform double in [lo, hi).
  double real(double lo, double hi) { return lo + (hi - lo) * real01(); }

  // Fisher-Yates shuffle using this generator's portable draws.
  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // k distinct integers from [0, bound), order of first selection.
  std::vector<long long> sample_distinct(std::uint64_t bound, std::size_t k);

private:
  std::mt19937_64 engine_;
};

inline std::vector<long long> Rng::sample_distinct(std::uint64_t bound, std::size_t k) {
  if (k > bound)
    throw invalid_argument_error("Rng::sample_distinct requires k <= bound",
                                 {{"k", k}, {"bound", bound}});
  // Floyd's algorithm: k draws, no retry loops, deterministic draw count.
  std::vector<long long> picked;
  picked.reserve(k);
  auto contains = [&](long long v) {
    for (long long p : picked)
      if (p == v) return true;
    return false;
  };
  for (std::uint64_t j = bound - k; j < bound; ++j) {
    const auto t = static_cast<long long>(below(j + 1));
    if (contains(t))
      picked.push_back(static_cast<long long>(j));
    else
      picked.push_back(t);
  }
  return picked;
}

}  // namespace crules
