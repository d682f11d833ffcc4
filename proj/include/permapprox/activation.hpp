#pragma once

// Randomized activation kernels. Bernoulli emission probabilities are encoded
// as Gaussians (mean p/2, std sqrt(p/5)); activations aggregate a fixed number
// of draws and clamp from below. Real-valued observations use closeness
// heuristics (z-value inverse, kernel density distance) and energy distance.
//
// Every kernel is a pure function of (inputs, rng stream), so results are
// bit-identical across runs and thread counts for the same stream key.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"

namespace permapprox {

struct EncodedDistribution {
  double mean = 0.0;
  double std = 0.0;
};

// N(p/2, sqrt(p/5)) encoding of a Bernoulli probability.
inline EncodedDistribution encode(double p) {
  if (!(p > 0.0) || p > 1.0)
    throw InputError("encode requires probability in (0, 1]");
  return {p / 2.0, std::sqrt(p / 5.0)};
}

enum class Aggregator { kMin, kMax, kMedian };

struct ActivationSpec {
  int draws = 5;
  double thresh = 0.0;
  Aggregator aggregator = Aggregator::kMax;

  // Role defaults. Rollout clamps at 1e-3 so a single cold token cannot
  // annihilate a whole log-domain episode score.
  static ActivationSpec rollout() { return {5, 1e-3, Aggregator::kMax}; }
  static ActivationSpec transition() { return {5, 0.0, Aggregator::kMin}; }
  static ActivationSpec dropout() { return {5, 0.0, Aggregator::kMedian}; }
};

// Median of an unsorted list; even sizes average the middle pair.
inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double aggregate(const std::vector<double>& samples, Aggregator agg) {
  switch (agg) {
    case Aggregator::kMin: return *std::min_element(samples.begin(), samples.end());
    case Aggregator::kMax: return *std::max_element(samples.begin(), samples.end());
    case Aggregator::kMedian: return median(samples);
  }
  return 0.0;
}

namespace detail {
inline std::vector<double> draw_samples(RngStream& rng, const EncodedDistribution& d,
                                        int draws) {
  std::vector<double> samples(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) samples[static_cast<std::size_t>(i)] = rng.next_normal(d.mean, d.std);
  return samples;
}
}  // namespace detail

// Single-token rollout activation: max(thresh, aggregator(draws from encode(p))).
inline double token_activation(double p, const ActivationSpec& spec, RngStream rng) {
  const auto samples = detail::draw_samples(rng, encode(p), spec.draws);
  return std::max(spec.thresh, aggregate(samples, spec.aggregator));
}

// Episode rollout activations, one per token in episode order. Empty when the
// state cannot emit some token: the episode is unscorable for that state.
// Per-token draws come from base.child(token), so values are independent of
// episode composition and reusable across arrangements.
inline std::vector<double> rollout_activation(const TppModel& model, int state,
                                              const std::vector<std::string>& episode,
                                              const ActivationSpec& spec,
                                              const RngStream& base) {
  std::vector<double> activations;
  activations.reserve(episode.size());
  for (const auto& token : episode) {
    const double p = model.emission(state, token);
    if (p <= 0.0) return {};
    activations.push_back(token_activation(p, spec, base.child(token)));
  }
  return activations;
}

struct ActivationResult {
  double value = 0.0;
  bool impossible = false;
};

// Transition activation: max(thresh, min(draws)) by default. A zero
// probability short-circuits to (thresh, impossible) without consuming draws.
inline ActivationResult transition_activation(double tp, const ActivationSpec& spec,
                                              RngStream rng) {
  if (tp < 0.0) throw InputError("transition probability must be nonnegative");
  if (tp == 0.0) return {spec.thresh, true};
  const auto samples = detail::draw_samples(rng, encode(tp), spec.draws);
  return {std::max(spec.thresh, aggregate(samples, spec.aggregator)), false};
}

// Dropout activation on raw probabilities: median(samples_a) * median(samples_b),
// clamped at thresh. samples_a is drawn first from the shared stream.
inline double dropout_activation(double p_a, double p_b, const ActivationSpec& spec,
                                 RngStream rng) {
  const double med_a = median(detail::draw_samples(rng, encode(p_a), spec.draws));
  const double med_b = median(detail::draw_samples(rng, encode(p_b), spec.draws));
  return std::max(spec.thresh, med_a * med_b);
}

// Convenience form over a shared token: 0 when either state lacks the token
// (callers skip such pairs).
inline double dropout_activation(const TppModel& model, int state_a, int state_b,
                                 const std::string& token, const ActivationSpec& spec,
                                 RngStream rng) {
  const double p_a = model.emission(state_a, token);
  const double p_b = model.emission(state_b, token);
  if (p_a <= 0.0 || p_b <= 0.0) return 0.0;
  return dropout_activation(p_a, p_b, spec, std::move(rng));
}

// ---------------------------------------------------------------------------
// Real-valued heuristics.
// ---------------------------------------------------------------------------

// Gaussian closeness heuristic on z = |value - mean| / std. Default inverts z
// (closeness to the mean scores high under maximization); literal mode keeps
// the raw min(z, thresh) form.
inline double model_heuristic_gaussian(double mean, double std_dev, double value,
                                       double thresh = 2.0, bool literal = false) {
  if (std_dev < 0.0) throw InputError("negative standard deviation");
  if (std_dev == 0.0) return value == mean ? 1.0 / kEps : kEps;
  const double z = std::abs(value - mean) / std_dev;
  if (literal) return std::min(z, thresh);
  return 1.0 / std::max(z, kEps);
}

namespace detail {
// Gaussian kernel density estimate with Silverman's bandwidth.
inline double kde_bandwidth(std::vector<double> sorted) {
  const std::size_t n = sorted.size();
  if (n < 2) return kEps;
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double sd = std::sqrt(var);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, kEps);
}

inline double kde_density(const std::vector<double>& samples, double h, double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  double total = 0.0;
  for (double s : samples) {
    const double u = (x - s) / h;
    total += std::exp(-0.5 * u * u);
  }
  return total * kInvSqrt2Pi / (h * static_cast<double>(samples.size()));
}
}  // namespace detail

// Empirical closeness heuristic: 1 / max(|peak density - density(value)|, eps),
// densities from a Gaussian kernel estimate over the sample set. The peak is
// the largest density over the sample points themselves.
inline double model_heuristic_samples(const std::vector<double>& samples, double value) {
  if (samples.empty()) throw InputError("empirical model requires samples");
  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  const double h = detail::kde_bandwidth(sorted);
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, detail::kde_density(samples, h, s));
  const double at_value = detail::kde_density(samples, h, value);
  return 1.0 / std::max(std::abs(peak - at_value), kEps);
}

// Energy distance between two empirical distributions:
//   2 E|X-Y| - E|X-X'| - E|Y-Y'|
// as a V-statistic over all ordered pairs (diagonal included). Symmetric,
// nonnegative, zero on identical sample sets.
inline double energy_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InputError("energy distance requires samples");
  auto mean_abs = [](const std::vector<double>& x, const std::vector<double>& y) {
    double total = 0.0;
    for (double xv : x)
      for (double yv : y) total += std::abs(xv - yv);
    return total / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
  };
  return 2.0 * mean_abs(a, b) - mean_abs(a, a) - mean_abs(b, b);
}

}  // namespace permapprox
