#pragma once

// Travelling Photographer Problem domain types: the state/emission/transition
// model, observation trails, candidate state arrangements, validation and
// synthetic instance generation.
//
// A model has N states. Each state carries a Bernoulli emission table
// (token -> probability in (0,1]) and a row of the row-stochastic transition
// matrix. A trail is an ordered list of episodes; a discrete episode is a
// duplicate-free list of tokens. An arrangement assigns one distinct state to
// every episode.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "permapprox/common.hpp"
#include "permapprox/rng.hpp"

namespace permapprox {

struct TppModel {
  std::vector<std::string> states;
  // Per-state emission table, indexed like `states`. Ordered maps keep every
  // iteration deterministic and stable across JSON round trips.
  std::vector<std::map<std::string, double>> emissions;
  std::vector<std::vector<double>> transitions;

  int num_states() const { return static_cast<int>(states.size()); }

  // -1 when the identifier is unknown.
  int index_of(std::string_view state) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == state) return static_cast<int>(i);
    return -1;
  }

  // Emission probability, or 0 when the state cannot emit the token.
  double emission(int state, const std::string& token) const {
    const auto& table = emissions[static_cast<std::size_t>(state)];
    const auto it = table.find(token);
    return it == table.end() ? 0.0 : it->second;
  }
};

struct ObservationTrail {
  std::vector<std::vector<std::string>> episodes;       // discrete mode
  std::vector<std::vector<double>> episodes_real;       // real-valued mode

  bool real_valued() const { return !episodes_real.empty(); }
  int length() const {
    return static_cast<int>(real_valued() ? episodes_real.size() : episodes.size());
  }
};

// Collapses duplicate tokens, keeping first occurrence order.
inline std::vector<std::string> dedup_episode(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  return out;
}

// Ordered sequence of distinct state indices, one per episode.
using StateArrangement = std::vector<int>;

// Defaults calibrated so the benchmark protocol (9 states, up to 6 tokens per
// state) yields informative trails: a 16-token vocabulary gives moderate
// cross-state token sharing and p in [0.5, 0.95] keeps episodes rich enough
// for the rollout scores to discriminate orderings at long horizons.
struct SyntheticSpec {
  int n_states = 9;
  int max_tokens_per_state = 6;
  int vocab_size = 16;
  double p_lo = 0.5;
  double p_hi = 0.95;
  int episodes = 9;
  std::uint64_t seed = 0;
};

struct Instance {
  TppModel model;
  StateArrangement ground_truth;
  ObservationTrail trail;
};

// ---------------------------------------------------------------------------
// Validation. Violations are data, not failures: an empty list means valid.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}
}  // namespace detail

inline std::vector<std::string> validate_model(const TppModel& model) {
  std::vector<std::string> violations;
  const std::size_t n = model.states.size();
  if (n == 0) violations.push_back("model has no states");

  std::set<std::string> seen;
  for (const auto& s : model.states)
    if (!seen.insert(s).second)
      violations.push_back("duplicate state identifier '" + s + "'");

  if (model.emissions.size() != n)
    violations.push_back("emission table count does not match state count");
  for (std::size_t i = 0; i < model.emissions.size() && i < n; ++i) {
    for (const auto& [token, p] : model.emissions[i]) {
      if (p == 0.0)
        violations.push_back("state '" + model.states[i] + "' token '" + token +
                             "': zero emission probability");
      else if (!(p > 0.0) || p > 1.0)
        violations.push_back("state '" + model.states[i] + "' token '" + token +
                             "': emission probability " + detail::fmt_g(p) +
                             " outside (0, 1]");
    }
  }

  if (model.transitions.size() != n) {
    violations.push_back("transition matrix is not N x N");
    return violations;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = model.transitions[i];
    if (row.size() != n) {
      violations.push_back("transition row " + std::to_string(i) + " has wrong length");
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] < 0.0)
        violations.push_back("negative transition probability at (" +
                             std::to_string(i) + ", " + std::to_string(j) + ")");
      sum += row[j];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      violations.push_back("row " + std::to_string(i) + " sums to " + detail::fmt_g(sum));
  }
  return violations;
}

// ---------------------------------------------------------------------------
// Arrangement enumeration (lexicographic k-permutations of state indices).
// ---------------------------------------------------------------------------

// Number of length-T arrangements of N states, saturating at max().
inline unsigned long long arrangement_count(int n, int t) {
  unsigned long long count = 1;
  for (int i = 0; i < t; ++i) {
    const unsigned long long factor = static_cast<unsigned long long>(n - i);
    if (factor != 0 && count > ~0ULL / factor) return ~0ULL;
    count *= factor;
  }
  return count;
}

namespace detail {
template <typename Fn>
void enumerate_rec(int n, int t, int depth, std::vector<int>& arr,
                   std::vector<char>& used, Fn& fn) {
  if (depth == t) {
    fn(const_cast<const std::vector<int>&>(arr));
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    used[static_cast<std::size_t>(i)] = 1;
    arr[static_cast<std::size_t>(depth)] = i;
    enumerate_rec(n, t, depth + 1, arr, used, fn);
    used[static_cast<std::size_t>(i)] = 0;
  }
}
}  // namespace detail

// Calls fn(arrangement) for every length-t arrangement of [0, n) in
// lexicographic order.
template <typename Fn>
void enumerate_arrangements(int n, int t, Fn fn) {
  std::vector<int> arr(static_cast<std::size_t>(t));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  detail::enumerate_rec(n, t, 0, arr, used, fn);
}

// Same, restricted to arrangements starting with `first`. Slices partition
// the full lexicographic stream, which is how scans parallelize.
template <typename Fn>
void enumerate_arrangements_from(int n, int t, int first, Fn fn) {
  std::vector<int> arr(static_cast<std::size_t>(t));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  arr[0] = first;
  used[static_cast<std::size_t>(first)] = 1;
  detail::enumerate_rec(n, t, 1, arr, used, fn);
}

// ---------------------------------------------------------------------------
// Synthetic instance generation.
// ---------------------------------------------------------------------------

// Draws a model, a revisit-free ground-truth tour and the observation trail
// the tour emits. Fully deterministic given spec.seed:
//   * transition rows normalize positive uniform draws,
//   * each state gets 1..max_tokens_per_state distinct vocabulary tokens with
//     probabilities uniform in [p_lo, p_hi],
//   * the tour starts uniformly and extends proportional to transition
//     weight among unvisited states,
//   * each episode emits the current state's tokens independently and is
//     resampled until non-empty.
inline Instance generate_instance(const SyntheticSpec& spec) {
  if (spec.episodes < 1)
    throw InputError("synthetic spec requires at least one episode");
  if (spec.episodes > spec.n_states)
    throw InputError("synthetic spec episodes (" + std::to_string(spec.episodes) +
                     ") exceed state count (" + std::to_string(spec.n_states) + ")");
  if (!(spec.p_lo > 0.0) || spec.p_hi < spec.p_lo || spec.p_hi > 1.0)
    throw InputError("synthetic spec needs 0 < p_lo <= p_hi <= 1");
  if (spec.vocab_size < spec.max_tokens_per_state)
    throw InputError("synthetic spec vocab smaller than max tokens per state");

  const RngStream base(spec.seed);
  const int n = spec.n_states;

  Instance inst;
  inst.model.states.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inst.model.states.push_back("s" + std::to_string(i));

  inst.model.transitions.assign(static_cast<std::size_t>(n),
                                std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    RngStream row = base.child("transitions").child(i);
    double sum = 0.0;
    auto& r = inst.model.transitions[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      r[static_cast<std::size_t>(j)] = row.next_uniform();
      sum += r[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < n; ++j) r[static_cast<std::size_t>(j)] /= sum;
  }

  inst.model.emissions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RngStream st = base.child("tokens").child(i);
    const int count =
        1 + static_cast<int>(st.next_below(static_cast<std::uint64_t>(spec.max_tokens_per_state)));
    // Partial Fisher-Yates over the vocabulary indices.
    std::vector<int> vocab(static_cast<std::size_t>(spec.vocab_size));
    for (int v = 0; v < spec.vocab_size; ++v) vocab[static_cast<std::size_t>(v)] = v;
    for (int k = 0; k < count; ++k) {
      const int pick =
          k + static_cast<int>(st.next_below(static_cast<std::uint64_t>(spec.vocab_size - k)));
      std::swap(vocab[static_cast<std::size_t>(k)], vocab[static_cast<std::size_t>(pick)]);
    }
    auto& table = inst.model.emissions[static_cast<std::size_t>(i)];
    for (int k = 0; k < count; ++k) {
      const double p = spec.p_lo + st.next_uniform() * (spec.p_hi - spec.p_lo);
      table["t" + std::to_string(vocab[static_cast<std::size_t>(k)])] = p;
    }
  }

  // Ground-truth walk without revisits.
  RngStream walk = base.child("walk");
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  int current = static_cast<int>(walk.next_below(static_cast<std::uint64_t>(n)));
  visited[static_cast<std::size_t>(current)] = 1;
  inst.ground_truth.push_back(current);
  for (int t = 1; t < spec.episodes; ++t) {
    double total = 0.0;
    for (int j = 0; j < n; ++j)
      if (!visited[static_cast<std::size_t>(j)])
        total += inst.model.transitions[static_cast<std::size_t>(current)][static_cast<std::size_t>(j)];
    const double pick = walk.next_uniform() * total;
    double acc = 0.0;
    int chosen = -1;
    for (int j = 0; j < n; ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      acc += inst.model.transitions[static_cast<std::size_t>(current)][static_cast<std::size_t>(j)];
      if (pick <= acc) {
        chosen = j;
        break;
      }
    }
    if (chosen < 0)  // guard against accumulated rounding at pick == total
      for (int j = n - 1; j >= 0; --j)
        if (!visited[static_cast<std::size_t>(j)]) {
          chosen = j;
          break;
        }
    visited[static_cast<std::size_t>(chosen)] = 1;
    inst.ground_truth.push_back(chosen);
    current = chosen;
  }

  // Episode emission, resampling empties.
  for (int t = 0; t < spec.episodes; ++t) {
    RngStream em = base.child("emit").child(t);
    const int state = inst.ground_truth[static_cast<std::size_t>(t)];
    const auto& table = inst.model.emissions[static_cast<std::size_t>(state)];
    std::vector<std::string> episode;
    while (episode.empty()) {
      for (const auto& [token, p] : table)
        if (em.next_uniform() <= p) episode.push_back(token);
    }
    inst.trail.episodes.push_back(std::move(episode));
  }
  return inst;
}

}  // namespace permapprox
