#pragma once

// Simulated attention decoders. Both variants combine a transition vector
// (consecutive transition probabilities of an arrangement) with per-episode
// rollout scores into one log-domain arrangement score.
//
// Transition activations are injected as a callback so callers control RNG
// keying and caching; the default keying is by content (episode index plus
// the state triple), which makes cached values reusable across arrangements.

#include <cmath>
#include <functional>
#include <vector>

#include "permapprox/activation.hpp"
#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"
#include "permapprox/rollout.hpp"

namespace permapprox {

enum class AttentionOrder { kFirst, kSecond };

// Activates the pairwise transition product for loop index t. Implementations
// decide stream keys; attention code never draws directly.
using TransitionActivator = std::function<ActivationResult(int, double)>;

inline RngStream transition_stream(const RngStream& rep, int t, int i, int j, int k) {
  return rep.child("transition").child(t).child(i).child(j).child(k);
}

// Degenerate T = 2 pair under 2-sequence attention (no triple exists).
inline RngStream pair_stream(const RngStream& rep, int i, int j) {
  return rep.child("transition-pair").child(i).child(j);
}

namespace detail {
// Sum of rollout log scores; impossible if any element is impossible.
inline bool sum_rollouts(const std::vector<LogScore>& rollouts, double& out) {
  double total = 0.0;
  for (const auto& r : rollouts) {
    if (r.is_impossible()) return false;
    total += r.value;
  }
  out = total;
  return true;
}
}  // namespace detail

// First order: activate overlapping pair products transitions[t]*transitions[t+1]
// for t in 0..T-3, each with a +1/T normalizer, multiply in the raw final
// transition, take the cube root, then multiply by all rollouts:
//   score = (1/3) * logtp + sum(rollouts).
// T = 1 is the rollout alone; T = 2 keeps only the raw transitions[0].
// Impossible transitions prune unless soft_transitions, which keeps the
// thresh-clamped activation value instead (still -inf when the clamp is 0).
inline LogScore first_order_attention(const std::vector<double>& transitions,
                                      const std::vector<LogScore>& rollouts,
                                      const TransitionActivator& activate,
                                      bool soft_transitions = false) {
  const int t_len = static_cast<int>(rollouts.size());
  double rollout_sum = 0.0;
  if (!detail::sum_rollouts(rollouts, rollout_sum)) return LogScore{};
  if (t_len == 1) return LogScore::from_log(rollout_sum);

  double logtp = 0.0;
  for (int t = 0; t + 2 < t_len; ++t) {
    const ActivationResult a =
        activate(t, transitions[static_cast<std::size_t>(t)] *
                        transitions[static_cast<std::size_t>(t) + 1]);
    if (a.impossible && !soft_transitions) return LogScore{};
    logtp += std::log(a.value) + 1.0 / static_cast<double>(t_len);
  }
  const double last = transitions[static_cast<std::size_t>(t_len) - 2];
  if (last <= 0.0 && !soft_transitions) return LogScore{};
  logtp += std::log(last);
  return LogScore::from_log(logtp / 3.0 + rollout_sum);
}

// 2-sequence: one term per overlapping pair,
//   term_t = (1/3) log a_t + rollout_t + rollout_{t+1} + 1/T,  t in 0..T-3,
// summed. Interior rollouts are counted twice. T = 2 collapses to a single
// term activating transitions[0] alone. Any impossible rollout (even the
// otherwise-uncounted last one) makes the arrangement impossible.
inline LogScore two_sequence_attention(const std::vector<double>& transitions,
                                       const std::vector<LogScore>& rollouts,
                                       const TransitionActivator& activate,
                                       bool soft_transitions = false) {
  const int t_len = static_cast<int>(rollouts.size());
  double unused = 0.0;
  if (!detail::sum_rollouts(rollouts, unused)) return LogScore{};
  if (t_len == 1) return rollouts[0];

  double total = 0.0;
  if (t_len == 2) {
    const ActivationResult a = activate(0, transitions[0]);
    if (a.impossible && !soft_transitions) return LogScore{};
    total = std::log(a.value) / 3.0 + rollouts[0].value + rollouts[1].value + 0.5;
    return LogScore::from_log(total);
  }
  for (int t = 0; t + 2 < t_len; ++t) {
    const ActivationResult a =
        activate(t, transitions[static_cast<std::size_t>(t)] *
                        transitions[static_cast<std::size_t>(t) + 1]);
    if (a.impossible && !soft_transitions) return LogScore{};
    total += std::log(a.value) / 3.0 + rollouts[static_cast<std::size_t>(t)].value +
             rollouts[static_cast<std::size_t>(t) + 1].value +
             1.0 / static_cast<double>(t_len);
  }
  return LogScore::from_log(total);
}

// Transition vector of an arrangement: element t = Pr(arr[t+1] | arr[t]).
inline std::vector<double> transition_vector(const TppModel& model,
                                             const StateArrangement& arr) {
  std::vector<double> tv;
  if (arr.size() < 2) return tv;
  tv.reserve(arr.size() - 1);
  for (std::size_t t = 0; t + 1 < arr.size(); ++t)
    tv.push_back(model.transitions[static_cast<std::size_t>(arr[t])]
                                  [static_cast<std::size_t>(arr[t + 1])]);
  return tv;
}

// Content-keyed activator for standalone scoring: pair products key on the
// state triple at (t, t+1, t+2); the degenerate T = 2 pair keys on the two
// states. Matches the solver's cache keys exactly.
inline TransitionActivator make_activator(const StateArrangement& arr,
                                          const ActivationSpec& spec,
                                          const RngStream& rep) {
  return [&arr, spec, rep](int t, double tp) {
    const RngStream stream =
        arr.size() == 2
            ? pair_stream(rep, arr[0], arr[1])
            : transition_stream(rep, t, arr[static_cast<std::size_t>(t)],
                                arr[static_cast<std::size_t>(t) + 1],
                                arr[static_cast<std::size_t>(t) + 2]);
    return transition_activation(tp, spec, stream);
  };
}

// Full arrangement score: episode rollouts + attention over transitions.
inline LogScore sequence_score(const TppModel& model, const ObservationTrail& trail,
                               const StateArrangement& arr, AttentionOrder order,
                               int clique_size, const ActivationSpec& rollout_spec,
                               const ActivationSpec& transition_spec,
                               bool soft_transitions, const RngStream& rep) {
  const auto per_episode = episode_scores(model, trail, arr, clique_size, rollout_spec, rep);
  std::vector<LogScore> rollouts;
  rollouts.reserve(per_episode.size());
  for (const auto& r : per_episode) rollouts.push_back(r.score);
  const auto tv = transition_vector(model, arr);
  const auto activate = make_activator(arr, transition_spec, rep);
  return order == AttentionOrder::kFirst
             ? first_order_attention(tv, rollouts, activate, soft_transitions)
             : two_sequence_attention(tv, rollouts, activate, soft_transitions);
}

}  // namespace permapprox
