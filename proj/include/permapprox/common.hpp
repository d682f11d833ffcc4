#pragma once

// Shared primitives: the log-domain score carrier, error types and numeric
// guard constants used across the library.

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace permapprox {

// Reciprocal guard used wherever a quantity is inverted.
inline constexpr double kEps = 1e-9;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Natural-log-domain score. -inf encodes "impossible"; comparisons in the
// log domain are order-identical to comparisons of the linear products the
// scores stand for.
struct LogScore {
  double value = kNegInf;

  static LogScore impossible() { return LogScore{}; }
  static LogScore from_log(double v) { return LogScore{v}; }

  bool is_impossible() const { return std::isinf(value) && value < 0.0; }

  friend auto operator<=>(const LogScore&, const LogScore&) = default;
};

// Malformed files, inconsistent dimensions, bad option values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration would exceed the configured arrangement cap. The offending
// count is carried so callers can report it.
class CapExceededError : public std::runtime_error {
 public:
  CapExceededError(const std::string& msg, unsigned long long count)
      : std::runtime_error(msg), count_(count) {}
  unsigned long long count() const { return count_; }

 private:
  unsigned long long count_;
};

// FNV-1a, used to turn token/state strings into RNG sub-stream keys.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace permapprox
