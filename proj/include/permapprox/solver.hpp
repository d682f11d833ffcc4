#pragma once

// Top-level randomized approximation solver: enumerate dropout-filtered
// arrangements, score each with the attention stack, keep the argmax, repeat
// with independent activation draws and majority-vote per position.
//
// All activations for one repetition are prefetched into content-keyed caches
// (episode x state rollouts, state-triple transition activations), so the
// arrangement scan is pure table lookups plus the attention formulas. Cached
// values equal direct sequence_score draws because both use identical stream
// keys.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <vector>

#include "permapprox/attention.hpp"
#include "permapprox/common.hpp"
#include "permapprox/dropout.hpp"
#include "permapprox/model.hpp"
#include "permapprox/parallel.hpp"
#include "permapprox/rng.hpp"
#include "permapprox/rollout.hpp"

namespace permapprox {

// Solver assembly defaults. The raw transition kernel clamps at 0, but a
// zero-valued activation annihilates the whole log-domain arrangement score;
// min-aggregated draws land below zero so often that by T=9 every candidate
// would collapse to -inf. The solver therefore floors transition activations
// at 1e-3 by default, mirroring the rollout floor; pass 0 to restore the raw
// kernel behavior.
inline ActivationSpec solver_transition_spec() {
  ActivationSpec spec = ActivationSpec::transition();
  spec.thresh = 1e-3;
  return spec;
}

struct MlaaConfig {
  int clique_size = 3;
  AttentionOrder attention = AttentionOrder::kFirst;
  ActivationSpec rollout_spec = ActivationSpec::rollout();
  ActivationSpec transition_spec = solver_transition_spec();
  ActivationSpec dropout_spec = ActivationSpec::dropout();
  bool dropout_enabled = true;
  int repetitions = 1;
  std::uint64_t seed = 0;
  bool soft_transitions = false;
  bool literal_pop = false;
  // Real-valued mode knobs.
  double rv_thresh = 2.0;
  bool rv_literal_z = false;
  int energy_samples = 64;
  unsigned long long cap = 5'000'000ULL;
};

// Root stream of one repetition; every activation key hangs off this.
inline RngStream rep_stream(std::uint64_t seed, int rep) {
  return RngStream(seed).child("rep").child(rep);
}

struct RepOutcome {
  bool feasible = false;
  StateArrangement arrangement;
  LogScore score;
  std::vector<int> must_traverse;
  unsigned long long scored = 0;
  unsigned long long pruned = 0;
};

struct SolveResult {
  bool feasible = false;
  StateArrangement best;
  LogScore score;
  std::vector<RepOutcome> reps;
  // Per-position tallies over feasible repetitions, state -> count.
  std::vector<std::map<int, int>> votes;
  bool vote_fallback = false;  // vote overridden by the best repetition
  unsigned long long scored_total = 0;
  unsigned long long pruned_total = 0;
  double wall_ms = 0.0;  // informational only, never serialized
};

inline double positional_error(const StateArrangement& predicted, const StateArrangement& truth) {
  if (predicted.size() != truth.size())
    throw InputError("positional error requires equal-length arrangements");
  if (predicted.empty()) return 0.0;
  int mismatched = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] != truth[i]) ++mismatched;
  return static_cast<double>(mismatched) / static_cast<double>(predicted.size());
}

// Modal state per position over the given arrangements; a tie at a position
// resolves to the tie_breaker arrangement's state there. tallies_out (if
// non-null) receives the per-position counts.
inline StateArrangement majority_vote(const std::vector<StateArrangement>& arrangements,
                                      const StateArrangement& tie_breaker,
                                      std::vector<std::map<int, int>>* tallies_out = nullptr) {
  const std::size_t t_len = tie_breaker.size();
  StateArrangement voted(t_len, -1);
  if (tallies_out) tallies_out->assign(t_len, {});
  for (std::size_t pos = 0; pos < t_len; ++pos) {
    std::map<int, int> tally;
    for (const auto& arr : arrangements) ++tally[arr[pos]];
    int best_state = -1, best_count = 0;
    bool tie = false;
    for (const auto& [state, count] : tally) {
      if (count > best_count) {
        best_state = state;
        best_count = count;
        tie = false;
      } else if (count == best_count) {
        tie = true;
      }
    }
    voted[pos] = tie ? tie_breaker[pos] : best_state;
    if (tallies_out) (*tallies_out)[pos] = std::move(tally);
  }
  return voted;
}

namespace detail {

struct RepScan {
  bool feasible = false;
  StateArrangement best;
  LogScore score;
  unsigned long long scored = 0;
};

// Parallel lexicographic argmax over the filtered arrangement stream, sliced
// by first element. make_score_fn() yields one scorer per slice so scorers
// may keep private scratch. Strict > plus in-order reduction keeps the
// lexicographically-first maximal arrangement regardless of thread count.
template <typename MakeScoreFn>
RepScan scan_filtered(int n, int t, const DropoutPredicate& pred,
                      const MakeScoreFn& make_score_fn) {
  std::vector<RepScan> slices(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t first) {
    auto score_fn = make_score_fn();
    RepScan local;
    filtered_arrangements_from(n, t, static_cast<int>(first), pred,
                               [&](const StateArrangement& arr) {
                                 ++local.scored;
                                 const LogScore s = score_fn(arr);
                                 if (s.is_impossible()) return;
                                 if (!local.feasible || s.value > local.score.value) {
                                   local.feasible = true;
                                   local.best = arr;
                                   local.score = s;
                                 }
                               });
    slices[first] = std::move(local);
  });
  RepScan out;
  for (auto& slice : slices) {
    out.scored += slice.scored;
    if (slice.feasible && (!out.feasible || slice.score.value > out.score.value)) {
      out.feasible = true;
      out.best = std::move(slice.best);
      out.score = slice.score;
    }
  }
  return out;
}

// Per-repetition activation caches driving the arrangement scan. Shared by
// the discrete and real-valued solvers: only the rollout fill differs.
struct ScanCaches {
  int n = 0;
  int t = 0;
  std::vector<LogScore> rollout;            // [t * n + state]
  std::vector<ActivationResult> triples;    // [((t*n + i)*n + j)*n + k], T >= 3
  std::vector<ActivationResult> pairs;      // [i * n + j], T == 2, 2-sequence

  const LogScore& rollout_at(int t_idx, int state) const {
    return rollout[static_cast<std::size_t>(t_idx * n + state)];
  }
  const ActivationResult& triple_at(int t_idx, int i, int j, int k) const {
    return triples[static_cast<std::size_t>(((t_idx * n + i) * n + j) * n + k)];
  }
  const ActivationResult& pair_at(int i, int j) const {
    return pairs[static_cast<std::size_t>(i * n + j)];
  }
};

// Fills the transition activation caches for all state triples (and the
// degenerate T = 2 pair table under 2-sequence attention).
inline void prefetch_transitions(const std::vector<std::vector<double>>& tm, int t_len,
                                 AttentionOrder order, const ActivationSpec& spec,
                                 const RngStream& rep, ScanCaches& caches) {
  const int n = caches.n;
  if (t_len >= 3) {
    caches.triples.assign(static_cast<std::size_t>(t_len - 2) * static_cast<std::size_t>(n) *
                              static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                          ActivationResult{});
    for (int t = 0; t + 2 < t_len; ++t)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double tp_ij = tm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          for (int k = 0; k < n; ++k) {
            if (k == i || k == j) continue;
            const double tp = tp_ij * tm[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            caches.triples[static_cast<std::size_t>(((t * n + i) * n + j) * n + k)] =
                transition_activation(tp, spec, transition_stream(rep, t, i, j, k));
          }
        }
  } else if (t_len == 2 && order == AttentionOrder::kSecond) {
    caches.pairs.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                        ActivationResult{});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        caches.pairs[static_cast<std::size_t>(i * n + j)] = transition_activation(
            tm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], spec,
            pair_stream(rep, i, j));
      }
  }
}

inline ScanCaches prefetch_discrete(const TppModel& model, const ObservationTrail& trail,
                                    const MlaaConfig& config, const RngStream& rep) {
  ScanCaches caches;
  const int n = model.num_states();
  const int t_len = trail.length();
  caches.n = n;
  caches.t = t_len;

  caches.rollout.resize(static_cast<std::size_t>(t_len) * static_cast<std::size_t>(n));
  for (int t = 0; t < t_len; ++t)
    for (int state = 0; state < n; ++state)
      caches.rollout[static_cast<std::size_t>(t * n + state)] =
          pseudo_state_rollout(model, state, trail.episodes[static_cast<std::size_t>(t)],
                               config.clique_size, config.rollout_spec,
                               rollout_stream(rep, t, state))
              .score;

  prefetch_transitions(model.transitions, t_len, config.attention, config.transition_spec,
                       rep, caches);
  return caches;
}

// Cache-backed scorer with private scratch; one instance per scan slice.
// Scores equal direct sequence_score evaluation under the same rep stream.
class CachedScorer {
 public:
  CachedScorer(const std::vector<std::vector<double>>& transitions, const ScanCaches& caches,
               AttentionOrder order, bool soft_transitions)
      : tm_(transitions), caches_(caches), order_(order), soft_(soft_transitions) {
    rollouts_.resize(static_cast<std::size_t>(caches.t));
    scratch_.reserve(static_cast<std::size_t>(caches.t));
  }

  LogScore operator()(const StateArrangement& arr) {
    for (std::size_t t = 0; t < arr.size(); ++t) {
      const LogScore& r = caches_.rollout_at(static_cast<int>(t), arr[t]);
      if (r.is_impossible()) return LogScore{};
      rollouts_[t] = r;
    }
    scratch_.clear();
    for (std::size_t t = 0; t + 1 < arr.size(); ++t)
      scratch_.push_back(tm_[static_cast<std::size_t>(arr[t])]
                            [static_cast<std::size_t>(arr[t + 1])]);
    const auto activate = [this, &arr](int t, double) {
      return arr.size() == 2 ? caches_.pair_at(arr[0], arr[1])
                             : caches_.triple_at(t, arr[static_cast<std::size_t>(t)],
                                                 arr[static_cast<std::size_t>(t) + 1],
                                                 arr[static_cast<std::size_t>(t) + 2]);
    };
    return order_ == AttentionOrder::kFirst
               ? first_order_attention(scratch_, rollouts_, activate, soft_)
               : two_sequence_attention(scratch_, rollouts_, activate, soft_);
  }

 private:
  const std::vector<std::vector<double>>& tm_;
  const ScanCaches& caches_;
  AttentionOrder order_;
  bool soft_;
  std::vector<LogScore> rollouts_;
  std::vector<double> scratch_;
};

// Shared repetition-and-vote wrapper. run_rep(r, outcome) scores one
// repetition; rescore(arr, rep_index) re-scores the voted arrangement under
// that repetition's streams. preds[r] is the predicate used by repetition r.
template <typename RunRep, typename Rescore>
SolveResult repeat_and_vote(int repetitions, const RunRep& run_rep, const Rescore& rescore,
                            const std::vector<DropoutPredicate>& preds, bool dropout_enabled) {
  SolveResult result;
  result.reps.resize(static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) run_rep(r, result.reps[static_cast<std::size_t>(r)]);

  int best_rep = -1;
  std::vector<StateArrangement> feasible_arrs;
  for (int r = 0; r < repetitions; ++r) {
    const auto& rep = result.reps[static_cast<std::size_t>(r)];
    result.scored_total += rep.scored;
    result.pruned_total += rep.pruned;
    if (!rep.feasible) continue;
    feasible_arrs.push_back(rep.arrangement);
    if (best_rep < 0 ||
        rep.score.value > result.reps[static_cast<std::size_t>(best_rep)].score.value)
      best_rep = r;
  }
  if (best_rep < 0) return result;  // no feasible arrangement anywhere

  const auto& best = result.reps[static_cast<std::size_t>(best_rep)];
  StateArrangement voted = majority_vote(feasible_arrs, best.arrangement, &result.votes);

  // The vote can splice positions from different repetitions into a sequence
  // that repeats a state, breaks the winning predicate, or scores impossible;
  // fall back to the intact best repetition in those cases.
  std::vector<int> sorted(voted);
  std::sort(sorted.begin(), sorted.end());
  bool ok = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  if (ok && dropout_enabled && !preds[static_cast<std::size_t>(best_rep)].accepts(voted))
    ok = false;
  LogScore voted_score;
  if (ok) {
    voted_score = voted == best.arrangement ? best.score : rescore(voted, best_rep);
    if (voted_score.is_impossible()) ok = false;
  }

  result.feasible = true;
  if (ok) {
    result.best = voted;
    result.score = voted_score;
    result.vote_fallback = false;
  } else {
    result.best = best.arrangement;
    result.score = best.score;
    result.vote_fallback = true;
  }
  return result;
}

}  // namespace detail

// Discrete-mode solve. Throws InputError on dimension mismatches and
// CapExceededError when the arrangement count exceeds config.cap.
inline SolveResult solve(const TppModel& model, const ObservationTrail& trail,
                         const MlaaConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const int n = model.num_states();
  const int t_len = trail.length();
  if (trail.real_valued()) throw InputError("real-valued trail passed to the discrete solver");
  if (t_len < 1) throw InputError("trail is empty");
  if (t_len > n)
    throw InputError("trail length " + std::to_string(t_len) + " exceeds state count " +
                     std::to_string(n));
  if (config.repetitions < 1) throw InputError("repetitions must be >= 1");
  const unsigned long long total = arrangement_count(n, t_len);
  if (total > config.cap)
    throw CapExceededError("arrangement count exceeds cap", total);

  std::vector<DropoutPredicate> preds(static_cast<std::size_t>(config.repetitions));
  std::vector<detail::ScanCaches> rep_caches(static_cast<std::size_t>(config.repetitions));

  const auto run_rep = [&](int r, RepOutcome& out) {
    const RngStream rep = rep_stream(config.seed, r);
    if (config.dropout_enabled)
      preds[static_cast<std::size_t>(r)] = dropout_function(
          model, trail, config.dropout_spec, rep, t_len, config.literal_pop);
    rep_caches[static_cast<std::size_t>(r)] = detail::prefetch_discrete(model, trail, config, rep);
    const auto& caches = rep_caches[static_cast<std::size_t>(r)];
    const auto scan = detail::scan_filtered(n, t_len, preds[static_cast<std::size_t>(r)], [&] {
      return detail::CachedScorer(model.transitions, caches, config.attention,
                                  config.soft_transitions);
    });
    out.feasible = scan.feasible;
    out.arrangement = scan.best;
    out.score = scan.score;
    out.must_traverse = preds[static_cast<std::size_t>(r)].must_traverse;
    out.scored = scan.scored;
    out.pruned = total - scan.scored;
  };

  const auto rescore = [&](const StateArrangement& arr, int r) {
    detail::CachedScorer scorer(model.transitions, rep_caches[static_cast<std::size_t>(r)],
                                config.attention, config.soft_transitions);
    return scorer(arr);
  };

  SolveResult result = detail::repeat_and_vote(config.repetitions, run_rep, rescore, preds,
                                               config.dropout_enabled);
  result.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

}  // namespace permapprox
