#pragma once

// Deterministic hierarchical random number streams.
//
// Every stochastic quantity in the library is drawn from an RngStream derived
// from a master seed through a chain of child keys (for example
// rep -> "rollout" -> episode -> state -> token). Streams with distinct key
// chains are independent, and a fixed (seed, key chain) reproduces identical
// draws regardless of evaluation order or thread count.
//
// The generator is pinned so recorded golden values stay portable:
//   * raw output   : splitmix64 (state += 0x9E3779B97F4A7C15, then the
//                    standard 30/27/31 finalizer),
//   * child(k)     : state' = mix64(mix64(state + 0x9E3779B97F4A7C15)
//                                   ^ (k + 0xD1B54A32D192ED03)),
//   * uniform      : ((raw >> 11) + 1) * 2^-53, in (0, 1],
//   * normal(m, s) : Box-Muller, m + s * sqrt(-2 ln u1) * cos(2 pi u2);
//                    exactly two uniforms per draw, no pair caching.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "permapprox/common.hpp"

namespace permapprox {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  // Derives an independent sub-stream. Nested mixing keeps the derivation
  // order-sensitive: child(a).child(b) != child(b).child(a).
  RngStream child(std::uint64_t key) const {
    std::uint64_t s = detail::mix64(state_ + 0x9E3779B97F4A7C15ULL);
    return RngStream(detail::mix64(s ^ (key + 0xD1B54A32D192ED03ULL)));
  }

  RngStream child(std::string_view key) const { return child(fnv1a64(key)); }
  RngStream child(int key) const { return child(static_cast<std::uint64_t>(key)); }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  // Uniform on (0, 1].
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller; consumes exactly two uniforms.
  double next_normal(double mean, double stddev) {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~0ULL - ~0ULL % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  std::uint64_t raw_state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace permapprox
