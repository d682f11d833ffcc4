#pragma once

// Dropout filter: data-dependent pruning of the arrangement space. Shared
// tokens induce a capacity graph over states; maximum-spanning structure on
// that graph (and on its transition-propagated square) nominates central
// states that every candidate arrangement must traverse.

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "permapprox/activation.hpp"
#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"

namespace permapprox {

using Matrix = std::vector<std::vector<double>>;

// Accumulated dropout activations: for every token occurrence in the trail
// and every unordered pair of states that can both emit it, both symmetric
// cells gain one activation. Draws key on (episode, token, pair), so the
// matrix is order-independent and reproducible.
inline Matrix transition_capacity(const TppModel& model, const ObservationTrail& trail,
                                  const ActivationSpec& spec, const RngStream& rep) {
  const int n = model.num_states();
  Matrix cap(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  const RngStream base = rep.child("dropout");
  for (std::size_t e = 0; e < trail.episodes.size(); ++e) {
    const RngStream ep_stream = base.child(static_cast<std::uint64_t>(e));
    for (const auto& token : trail.episodes[e]) {
      const RngStream tok_stream = ep_stream.child(token);
      for (int a = 0; a < n; ++a) {
        if (model.emission(a, token) <= 0.0) continue;
        for (int b = a + 1; b < n; ++b) {
          if (model.emission(b, token) <= 0.0) continue;
          const double act = dropout_activation(model, a, b, token, spec,
                                                tok_stream.child(a).child(b));
          cap[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += act;
          cap[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] += act;
        }
      }
    }
  }
  return cap;
}

namespace detail {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  Matrix out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i][k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i][j] += aik * b[k][j];
    }
  return out;
}

// Spanning-tree weights must be comparable nonnegative affinities: symmetrize,
// clamp negatives, zero the diagonal.
inline Matrix symmetrize_clamp(const Matrix& x) {
  const std::size_t n = x.size();
  Matrix out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = 0.5 * (x[i][j] + x[j][i]);
      out[i][j] = v > 0.0 ? v : 0.0;
    }
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[static_cast<std::size_t>(rb)] = ra;
    return true;
  }
};

}  // namespace detail

struct WeightedEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

// Kruskal maximum-spanning forest over the positive upper triangle. Descending
// weight, ties broken by (a, b) lexicographic order.
inline std::vector<WeightedEdge> max_spanning_edges(const Matrix& m) {
  const int n = static_cast<int>(m.size());
  std::vector<WeightedEdge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double w = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (w > 0.0) edges.push_back({i, j, w});
    }
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  std::vector<WeightedEdge> selected;
  detail::UnionFind uf(n);
  for (const auto& e : edges)
    if (uf.unite(e.a, e.b)) selected.push_back(e);
  return selected;
}

struct DropoutPredicate {
  std::vector<int> must_traverse;

  bool accepts(const StateArrangement& arr) const {
    for (int s : must_traverse)
      if (std::find(arr.begin(), arr.end(), s) == arr.end()) return false;
    return true;
  }
};

// Builds the must-traverse predicate from M = [C, C.T.C.T - C.T] (T the
// transition matrix). Each member matrix nominates one state: per-state weight
// is the sum of incident selected spanning edges; the argmax-weight state
// joins must_traverse (ties toward the lowest index). literal_pop instead
// takes the bottom of the descending ranking (minimum positive weight, ties
// toward the highest index). Deduplicated, capped at t_len - 1 so at least
// one arrangement always survives.
inline DropoutPredicate predicate_from_capacity(const Matrix& cap, const Matrix& tm,
                                                int t_len, bool literal_pop = false) {
  const Matrix ct = detail::matmul(cap, tm);
  const Matrix ctct = detail::matmul(ct, ct);
  Matrix second(ct.size(), std::vector<double>(ct.size(), 0.0));
  for (std::size_t i = 0; i < ct.size(); ++i)
    for (std::size_t j = 0; j < ct.size(); ++j) second[i][j] = ctct[i][j] - ct[i][j];

  DropoutPredicate pred;
  const int n = static_cast<int>(cap.size());
  const std::array<const Matrix*, 2> members = {&cap, &second};
  for (const Matrix* raw : members) {
    const Matrix affinity = detail::symmetrize_clamp(*raw);
    const auto edges = max_spanning_edges(affinity);
    std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : edges) {
      weight[static_cast<std::size_t>(e.a)] += e.weight;
      weight[static_cast<std::size_t>(e.b)] += e.weight;
    }
    int chosen = -1;
    if (!literal_pop) {
      for (int s = 0; s < n; ++s)
        if (weight[static_cast<std::size_t>(s)] > 0.0 &&
            (chosen < 0 ||
             weight[static_cast<std::size_t>(s)] > weight[static_cast<std::size_t>(chosen)]))
          chosen = s;
    } else {
      // Descending stable ranking, pop the back.
      std::vector<int> ranking;
      for (int s = 0; s < n; ++s)
        if (weight[static_cast<std::size_t>(s)] > 0.0) ranking.push_back(s);
      std::stable_sort(ranking.begin(), ranking.end(), [&](int x, int y) {
        return weight[static_cast<std::size_t>(x)] > weight[static_cast<std::size_t>(y)];
      });
      if (!ranking.empty()) chosen = ranking.back();
    }
    if (chosen >= 0 &&
        std::find(pred.must_traverse.begin(), pred.must_traverse.end(), chosen) ==
            pred.must_traverse.end())
      pred.must_traverse.push_back(chosen);
  }
  const std::size_t cap_size = t_len > 0 ? static_cast<std::size_t>(t_len - 1) : 0;
  if (pred.must_traverse.size() > cap_size) pred.must_traverse.resize(cap_size);
  return pred;
}

inline DropoutPredicate dropout_function(const TppModel& model, const ObservationTrail& trail,
                                         const ActivationSpec& spec, const RngStream& rep,
                                         int t_len, bool literal_pop = false) {
  return predicate_from_capacity(transition_capacity(model, trail, spec, rep),
                                 model.transitions, t_len, literal_pop);
}

namespace detail {
template <typename Fn>
void filtered_rec(int n, int t, int depth, std::vector<int>& arr, std::vector<char>& used,
                  const std::vector<char>& is_must, int missing, Fn& fn) {
  if (t - depth < missing) return;  // subtree cannot cover the remaining musts
  if (depth == t) {
    fn(const_cast<const std::vector<int>&>(arr));
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    used[static_cast<std::size_t>(i)] = 1;
    arr[static_cast<std::size_t>(depth)] = i;
    filtered_rec(n, t, depth + 1, arr, used, is_must,
                 missing - (is_must[static_cast<std::size_t>(i)] ? 1 : 0), fn);
    used[static_cast<std::size_t>(i)] = 0;
  }
}
}  // namespace detail

// Lexicographic stream of predicate-satisfying arrangements. Subtrees that
// cannot fit the remaining must-traverse states are skipped; the yielded set
// is exactly the filtered full enumeration.
template <typename Fn>
void filtered_arrangements(int n, int t, const DropoutPredicate& pred, Fn fn) {
  std::vector<int> arr(static_cast<std::size_t>(t));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<char> is_must(static_cast<std::size_t>(n), 0);
  for (int s : pred.must_traverse) is_must[static_cast<std::size_t>(s)] = 1;
  detail::filtered_rec(n, t, 0, arr, used, is_must,
                       static_cast<int>(pred.must_traverse.size()), fn);
}

// Same stream restricted to arrangements starting with `first`; the slices
// over all first elements partition the full stream in lexicographic order.
template <typename Fn>
void filtered_arrangements_from(int n, int t, int first, const DropoutPredicate& pred, Fn fn) {
  std::vector<int> arr(static_cast<std::size_t>(t));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<char> is_must(static_cast<std::size_t>(n), 0);
  for (int s : pred.must_traverse) is_must[static_cast<std::size_t>(s)] = 1;
  arr[0] = first;
  used[static_cast<std::size_t>(first)] = 1;
  detail::filtered_rec(n, t, 1, arr, used, is_must,
                       static_cast<int>(pred.must_traverse.size()) -
                           (is_must[static_cast<std::size_t>(first)] ? 1 : 0),
                       fn);
}

}  // namespace permapprox
