#pragma once

// Pseudo state rollout: compresses one state-vs-episode match into a single
// log-domain score via products over k-subset cliques of the per-token
// activations.
//
// With n activations and k = min(clique_size, n), every activation appears in
// C(n-1, k-1) of the C(n, k) cliques and each clique contributes a constant
// e^(1/C(n,k)), so the enumerated sum collapses exactly to
//   log value = C(n-1, k-1) * sum(log a_i) + 1
//   score     = (1/3) * log value + log n.
// Tests enumerate the cliques independently; the identity is algebraic, not
// an approximation.

#include <cmath>
#include <string>
#include <vector>

#include "permapprox/activation.hpp"
#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"

namespace permapprox {

struct RolloutScore {
  LogScore score;
  int tokens = 0;
};

// C(n, k) in doubles; exact for the small n used here.
inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double value = 1.0;
  for (int i = 1; i <= k; ++i)
    value = value * static_cast<double>(n - k + i) / static_cast<double>(i);
  return value;
}

// Closed-form clique score of a list of positive activations. Empty input or
// a nonpositive activation is unscorable.
inline LogScore clique_log_score(const std::vector<double>& activations, int clique_size) {
  if (activations.empty()) return LogScore{};
  const int n = static_cast<int>(activations.size());
  const int k = std::min(clique_size, n);
  double sum_log = 0.0;
  for (double a : activations) {
    if (a <= 0.0) return LogScore{};
    sum_log += std::log(a);
  }
  const double multiplicity = binomial(n - 1, k - 1);
  const double log_value = multiplicity * sum_log + 1.0;
  return LogScore::from_log(log_value / 3.0 + std::log(static_cast<double>(n)));
}

// Stream for episode t scored as `state`; per-token draws branch off inside
// rollout_activation. Keying by content, not arrangement position, lets one
// cached activation serve every arrangement that places `state` at episode t.
inline RngStream rollout_stream(const RngStream& rep, int t, int state) {
  return rep.child("rollout").child(t).child(state);
}

inline RolloutScore pseudo_state_rollout(const TppModel& model, int state,
                                         const std::vector<std::string>& episode,
                                         int clique_size, const ActivationSpec& spec,
                                         const RngStream& stream) {
  if (clique_size < 1) throw InputError("clique size must be at least 1");
  RolloutScore out;
  out.tokens = static_cast<int>(episode.size());
  const auto activations = rollout_activation(model, state, episode, spec, stream);
  out.score = clique_log_score(activations, clique_size);
  return out;
}

// Per-episode rollout scores for one arrangement. Any impossible element makes
// the arrangement impossible downstream.
inline std::vector<RolloutScore> episode_scores(const TppModel& model,
                                                const ObservationTrail& trail,
                                                const StateArrangement& arr,
                                                int clique_size, const ActivationSpec& spec,
                                                const RngStream& rep) {
  std::vector<RolloutScore> scores;
  scores.reserve(arr.size());
  for (std::size_t t = 0; t < arr.size(); ++t)
    scores.push_back(pseudo_state_rollout(model, arr[t], trail.episodes[t], clique_size,
                                          spec, rollout_stream(rep, static_cast<int>(t), arr[t])));
  return scores;
}

}  // namespace permapprox
