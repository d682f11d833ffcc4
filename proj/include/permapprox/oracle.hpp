#pragma once

// Exact maximum-a-posteriori oracle. Scores every duplicate-free arrangement
// with the true log joint likelihood and keeps the best (lexicographically
// first on ties). Intended for small instances and for auditing the
// approximate solver; the arrangement count is capped, not the runtime.

#include <cmath>
#include <string>
#include <vector>

#include "permapprox/common.hpp"
#include "permapprox/model.hpp"

namespace permapprox {

// Log likelihood of one episode under one state. Observed tokens contribute
// log p each; tokens the state cannot emit make the episode impossible. When
// full_bernoulli is set, the state's unobserved tokens contribute log(1 - p)
// as well.
inline LogScore episode_log_likelihood(const TppModel& model, int state,
                                       const std::vector<std::string>& episode,
                                       bool full_bernoulli = false) {
  double total = 0.0;
  for (const auto& token : episode) {
    const double p = model.emission(state, token);
    if (p <= 0.0) return LogScore{};
    total += std::log(p);
  }
  if (full_bernoulli) {
    for (const auto& [token, p] : model.emissions[static_cast<std::size_t>(state)]) {
      if (std::find(episode.begin(), episode.end(), token) != episode.end()) continue;
      if (p >= 1.0) return LogScore{};
      total += std::log(1.0 - p);
    }
  }
  return LogScore::from_log(total);
}

// Log joint likelihood of a full arrangement: episode terms plus transition
// terms along consecutive states. Zero transitions are impossible.
inline LogScore arrangement_log_likelihood(const TppModel& model,
                                           const ObservationTrail& trail,
                                           const StateArrangement& arr,
                                           bool full_bernoulli = false) {
  double total = 0.0;
  for (std::size_t t = 0; t < arr.size(); ++t) {
    const LogScore ep = episode_log_likelihood(
        model, arr[t], trail.episodes[t], full_bernoulli);
    if (ep.is_impossible()) return LogScore{};
    total += ep.value;
  }
  for (std::size_t t = 0; t + 1 < arr.size(); ++t) {
    const double tp = model.transitions[static_cast<std::size_t>(arr[t])]
                                       [static_cast<std::size_t>(arr[t + 1])];
    if (tp <= 0.0) return LogScore{};
    total += std::log(tp);
  }
  return LogScore::from_log(total);
}

struct OracleResult {
  bool feasible = false;
  StateArrangement best;
  LogScore score;
  unsigned long long scored = 0;  // arrangements enumerated
};

// Exhaustive MAP search. Throws CapExceededError before enumerating when the
// arrangement count exceeds `cap`.
inline OracleResult exact_map_oracle(const TppModel& model, const ObservationTrail& trail,
                                     bool full_bernoulli = false,
                                     unsigned long long cap = 5'000'000ULL) {
  const int n = model.num_states();
  const int t = trail.length();
  if (t < 1 || t > n)
    throw InputError("trail length " + std::to_string(t) +
                     " incompatible with " + std::to_string(n) + " states");
  const unsigned long long count = arrangement_count(n, t);
  if (count > cap)
    throw CapExceededError("oracle arrangement count exceeds cap", count);

  OracleResult result;
  enumerate_arrangements(n, t, [&](const StateArrangement& arr) {
    ++result.scored;
    const LogScore s = arrangement_log_likelihood(model, trail, arr, full_bernoulli);
    if (s.is_impossible()) return;
    // Strict improvement keeps the lexicographically first argmax.
    if (!result.feasible || s.value > result.score.value) {
      result.feasible = true;
      result.best = arr;
      result.score = s;
    }
  });
  return result;
}

}  // namespace permapprox
