#pragma once

// The approximation architecture appropriated to the Travelling Salesman
// Problem: reciprocal-ratio node activation and mean-normalized edge
// activation (both deterministic), exhaustive Local Minima over small
// sub-permutations, randomized partition-and-concatenate global search,
// 2-local (2-opt) improvement gated on the activation score, and a Held-Karp
// exact oracle for approximation factors.
//
// Node activation closed form: with m tour nodes and q_i the per-node ratio,
// the product over all ordered 3-tuples of distinct nodes (c = m(m-1)(m-2)
// of them, constant e^(1/c^2) each) collapses to
//   log clique_act = 3(m-1)(m-2) * sum(log q_i) + 1/c
// because each node occupies 3(m-1)(m-2) tuple slots. Tests enumerate the
// tuples independently.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"

namespace permapprox {

using CostMatrix = std::vector<std::vector<double>>;

struct Tour {
  std::vector<int> nodes;
  bool closed = true;
};

inline std::vector<std::string> validate_cost_matrix(const CostMatrix& cost) {
  std::vector<std::string> violations;
  const std::size_t n = cost.size();
  if (n < 2) violations.push_back("cost matrix needs at least 2 nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (cost[i].size() != n) {
      violations.push_back("row " + std::to_string(i) + " has wrong length");
      continue;
    }
    if (cost[i][i] != 0.0)
      violations.push_back("nonzero diagonal at (" + std::to_string(i) + ", " +
                           std::to_string(i) + ")");
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && !(cost[i][j] > 0.0))
        violations.push_back("nonpositive cost at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
      if (j > i && cost[i][j] != cost[j][i])
        violations.push_back("asymmetric pair (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
    }
  }
  return violations;
}

inline double tour_length(const CostMatrix& cost, const Tour& tour) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tour.nodes.size(); ++i)
    total += cost[static_cast<std::size_t>(tour.nodes[i])]
                 [static_cast<std::size_t>(tour.nodes[i + 1])];
  if (tour.closed && tour.nodes.size() > 1)
    total += cost[static_cast<std::size_t>(tour.nodes.back())]
                 [static_cast<std::size_t>(tour.nodes.front())];
  return total;
}

inline double mean_offdiagonal(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) total += cost[i][j];
  return total / static_cast<double>(n * (n - 1));
}

// Mean-normalized reciprocal-cost product over tour edges, log domain:
//   (1/3) * sum_edges(log(mu/w) + 1/L) = (1/3)(sum log(mu/w) + 1).
// Strictly decreasing in sum(log w): cheaper tours score higher.
inline double edge_activation(const CostMatrix& cost, const Tour& tour) {
  if (tour.nodes.size() < 2) throw InputError("edge activation needs at least 2 nodes");
  const double mu = mean_offdiagonal(cost);
  const std::size_t m = tour.nodes.size();
  const std::size_t edges = tour.closed ? m : m - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < edges; ++i) {
    const double w = cost[static_cast<std::size_t>(tour.nodes[i])]
                         [static_cast<std::size_t>(tour.nodes[(i + 1) % m])];
    sum += std::log(mu / w);
  }
  return (sum + 1.0) / 3.0;
}

namespace detail {
// Per-node ratio entering the clique product. edge_cost is the summed weight
// of tour edges incident to the node, denom the rest of its cost row. The
// printed ratio r = edge_cost/denom is small for good nodes; the default
// orientation inverts it so maximization prefers good nodes. denom <= 0 caps
// at 1/eps in either mode.
inline double node_ratio(double edge_cost, double row_sum, bool literal_ratio) {
  const double denom = row_sum - edge_cost;
  if (denom <= 0.0) return 1.0 / kEps;
  const double r = edge_cost / denom;
  return literal_ratio ? r : 1.0 / r;
}
}  // namespace detail

// Ordered-3-tuple clique product over per-node ratios, log domain, closed
// form (see header comment). Requires at least 3 nodes.
inline double node_activation(const CostMatrix& cost, const Tour& tour,
                              bool literal_ratio = false) {
  const int m = static_cast<int>(tour.nodes.size());
  if (m < 3) throw InputError("node activation needs at least 3 nodes");
  double sum_log_q = 0.0;
  for (int idx = 0; idx < m; ++idx) {
    const int node = tour.nodes[static_cast<std::size_t>(idx)];
    double edge_cost = 0.0;
    if (idx + 1 < m || tour.closed)
      edge_cost += cost[static_cast<std::size_t>(node)]
                       [static_cast<std::size_t>(tour.nodes[static_cast<std::size_t>((idx + 1) % m)])];
    if (idx > 0 || tour.closed)
      edge_cost += cost[static_cast<std::size_t>(node)]
                       [static_cast<std::size_t>(tour.nodes[static_cast<std::size_t>((idx + m - 1) % m)])];
    double row_sum = 0.0;
    for (double w : cost[static_cast<std::size_t>(node)]) row_sum += w;
    sum_log_q += std::log(detail::node_ratio(edge_cost, row_sum, literal_ratio));
  }
  const double c = static_cast<double>(m) * (m - 1) * (m - 2);
  const double log_clique = 3.0 * (m - 1) * (m - 2) * sum_log_q + 1.0 / c;
  return log_clique / 3.0;
}

// Combined architecture score of a tour (log domain).
inline double tsp_score(const CostMatrix& cost, const Tour& tour, bool literal_ratio = false) {
  return edge_activation(cost, tour) + node_activation(cost, tour, literal_ratio);
}

struct LocalMinimaResult {
  Tour tour;  // open path
  double score = kNegInf;
};

// Exhaustive argmax of the activation score over length-sized arrangements of
// the given nodes, scored as open paths. Lexicographic enumeration over the
// sorted node ids plus strict > keeps the lexicographically-first maximum.
inline LocalMinimaResult local_minima(const CostMatrix& cost, std::vector<int> nodes,
                                      int length, bool literal_ratio = false,
                                      unsigned long long cap = 5'000'000ULL) {
  if (length < 3) throw InputError("local minima needs length >= 3");
  if (length > static_cast<int>(nodes.size()))
    throw InputError("length exceeds node subset size");
  std::sort(nodes.begin(), nodes.end());
  const unsigned long long count =
      arrangement_count(static_cast<int>(nodes.size()), length);
  if (count > cap) throw CapExceededError("sub-permutation count exceeds cap", count);

  LocalMinimaResult result;
  Tour candidate;
  candidate.closed = false;
  candidate.nodes.resize(static_cast<std::size_t>(length));
  enumerate_arrangements(static_cast<int>(nodes.size()), length,
                         [&](const std::vector<int>& idx) {
                           for (int i = 0; i < length; ++i)
                             candidate.nodes[static_cast<std::size_t>(i)] =
                                 nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
                           const double s = tsp_score(cost, candidate, literal_ratio);
                           if (result.tour.nodes.empty() || s > result.score) {
                             result.tour = candidate;
                             result.score = s;
                           }
                         });
  return result;
}

namespace detail {
// Greedy cheapest-link concatenation: extend from the current path end to the
// nearest head or tail among remaining segments, reversing tail attachments.
// Ties prefer the lowest segment index, then head over tail.
inline std::vector<int> concat_segments(const CostMatrix& cost,
                                        std::vector<std::vector<int>> segments) {
  std::vector<int> path = std::move(segments[0]);
  std::vector<char> used(segments.size(), 0);
  used[0] = 1;
  for (std::size_t placed = 1; placed < segments.size(); ++placed) {
    const int end = path.back();
    std::size_t best_seg = 0;
    bool best_reversed = false;
    double best_cost = 0.0;
    bool found = false;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (used[s]) continue;
      const double head = cost[static_cast<std::size_t>(end)]
                              [static_cast<std::size_t>(segments[s].front())];
      const double tail = cost[static_cast<std::size_t>(end)]
                              [static_cast<std::size_t>(segments[s].back())];
      if (!found || head < best_cost) {
        found = true;
        best_cost = head;
        best_seg = s;
        best_reversed = false;
      }
      if (tail < best_cost) {
        best_cost = tail;
        best_seg = s;
        best_reversed = true;
      }
    }
    auto& seg = segments[best_seg];
    if (best_reversed) std::reverse(seg.begin(), seg.end());
    path.insert(path.end(), seg.begin(), seg.end());
    used[best_seg] = 1;
  }
  return path;
}
}  // namespace detail

struct PartitionSearchResult {
  Tour best;  // closed
  double length = 0.0;
  int repetitions = 0;
};

// Called after each repetition with (rep index, best tour so far, its length).
using RepetitionObserver = std::function<void(int, const Tour&, double)>;

// Randomized global search: per repetition, shuffle the nodes, cut into
// subsets of subset_size (a short remainder merges into the previous subset),
// solve each subset exhaustively with local_minima, greedily concatenate the
// segments and close the tour. Best across repetitions by (length, then
// lexicographic nodes); with one seed the best-so-far sequence is a prefix
// property, so longer runs extend shorter ones.
inline PartitionSearchResult partition_search(const CostMatrix& cost, int subset_size,
                                              int repetitions, std::uint64_t seed,
                                              bool literal_ratio = false,
                                              const RepetitionObserver& observer = {}) {
  const int n = static_cast<int>(cost.size());
  if (subset_size < 3) throw InputError("subset size must be at least 3");
  if (subset_size > n) throw InputError("subset size exceeds node count");
  if (repetitions < 1) throw InputError("repetitions must be >= 1");

  const RngStream base = RngStream(seed).child("partition");
  PartitionSearchResult result;
  result.repetitions = repetitions;

  for (int rep = 0; rep < repetitions; ++rep) {
    RngStream stream = base.child(rep);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < n - 1; ++k) {
      const int pick = k + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(n - k)));
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick)]);
    }

    std::vector<std::vector<int>> subsets;
    for (int at = 0; at < n; at += subset_size) {
      const int take = std::min(subset_size, n - at);
      subsets.emplace_back(order.begin() + at, order.begin() + at + take);
    }
    if (subsets.size() > 1 && static_cast<int>(subsets.back().size()) < 3) {
      // A remainder of 1-2 nodes cannot host node activation. Borrow from the
      // previous subset when it stays >= 3; otherwise merge the remainder in.
      auto& prev = subsets[subsets.size() - 2];
      auto& last = subsets.back();
      const int need = 3 - static_cast<int>(last.size());
      if (static_cast<int>(prev.size()) - need >= 3) {
        last.insert(last.begin(), prev.end() - need, prev.end());
        prev.erase(prev.end() - need, prev.end());
      } else {
        prev.insert(prev.end(), last.begin(), last.end());
        subsets.pop_back();
      }
    }

    std::vector<std::vector<int>> segments;
    segments.reserve(subsets.size());
    for (auto& subset : subsets)
      segments.push_back(local_minima(cost, subset, static_cast<int>(subset.size()),
                                      literal_ratio)
                             .tour.nodes);

    Tour tour;
    tour.closed = true;
    tour.nodes = detail::concat_segments(cost, std::move(segments));
    const double len = tour_length(cost, tour);
    if (result.best.nodes.empty() || len < result.length ||
        (len == result.length && tour.nodes < result.best.nodes)) {
      result.best = tour;
      result.length = len;
    }
    if (observer) observer(rep, result.best, result.length);
  }
  return result;
}

// Best-improving 2-opt local search on a closed tour. A move is accepted only
// when the activation score strictly increases AND the tour length does not
// increase, which keeps the improvement monotone in length (the score alone
// is not length-monotone). Per-candidate evaluation is O(1): a segment
// reversal changes only the two swapped edges and the four endpoint nodes'
// incident costs.
inline Tour two_local_improve(const CostMatrix& cost, const Tour& input, int max_passes = 100,
                              bool literal_ratio = false) {
  if (!input.closed) throw InputError("2-local improvement expects a closed tour");
  const int m = static_cast<int>(input.nodes.size());
  if (m < 4) return input;  // no non-trivial 2-opt move exists

  std::vector<int> tour = input.nodes;
  const int n = static_cast<int>(cost.size());
  std::vector<double> row_sum(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (double w : cost[static_cast<std::size_t>(i)]) row_sum[static_cast<std::size_t>(i)] += w;

  std::vector<double> node_cost(static_cast<std::size_t>(n), 0.0);
  auto recompute_nodes = [&] {
    for (int idx = 0; idx < m; ++idx) {
      const int node = tour[static_cast<std::size_t>(idx)];
      node_cost[static_cast<std::size_t>(node)] =
          cost[static_cast<std::size_t>(node)]
              [static_cast<std::size_t>(tour[static_cast<std::size_t>((idx + 1) % m)])] +
          cost[static_cast<std::size_t>(node)]
              [static_cast<std::size_t>(tour[static_cast<std::size_t>((idx + m - 1) % m)])];
    }
  };
  recompute_nodes();

  const double node_factor = static_cast<double>(m - 1) * (m - 2);
  auto log_q = [&](int node) {
    return std::log(detail::node_ratio(node_cost[static_cast<std::size_t>(node)],
                                       row_sum[static_cast<std::size_t>(node)], literal_ratio));
  };

  double best_known_length = tour_length(cost, {tour, true});
  for (int pass = 0; pass < max_passes; ++pass) {
    int best_i = -1, best_j = -1;
    double best_gain = 0.0;
    for (int i = 0; i + 2 < m; ++i) {
      const int a = tour[static_cast<std::size_t>(i)];
      const int b = tour[static_cast<std::size_t>(i) + 1];
      const double w_ab = cost[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      const int j_end = (i == 0) ? m - 1 : m;
      for (int j = i + 2; j < j_end; ++j) {
        const int c = tour[static_cast<std::size_t>(j)];
        const int d = tour[static_cast<std::size_t>((j + 1) % m)];
        const double w_cd = cost[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
        const double w_ac = cost[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
        const double w_bd = cost[static_cast<std::size_t>(b)][static_cast<std::size_t>(d)];
        const double delta_len = w_ac + w_bd - w_ab - w_cd;
        if (delta_len > 0.0) continue;

        const double delta_log_w = std::log(w_ac) + std::log(w_bd) - std::log(w_ab) -
                                   std::log(w_cd);
        const double old_q = log_q(a) + log_q(b) + log_q(c) + log_q(d);
        node_cost[static_cast<std::size_t>(a)] += w_ac - w_ab;
        node_cost[static_cast<std::size_t>(b)] += w_bd - w_ab;
        node_cost[static_cast<std::size_t>(c)] += w_ac - w_cd;
        node_cost[static_cast<std::size_t>(d)] += w_bd - w_cd;
        const double new_q = log_q(a) + log_q(b) + log_q(c) + log_q(d);
        node_cost[static_cast<std::size_t>(a)] -= w_ac - w_ab;
        node_cost[static_cast<std::size_t>(b)] -= w_bd - w_ab;
        node_cost[static_cast<std::size_t>(c)] -= w_ac - w_cd;
        node_cost[static_cast<std::size_t>(d)] -= w_bd - w_cd;

        const double gain = -delta_log_w / 3.0 + node_factor * (new_q - old_q);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    std::reverse(tour.begin() + best_i + 1, tour.begin() + best_j + 1);
    recompute_nodes();
    // Guard the hard no-increase invariant against accumulated rounding.
    const double new_length = tour_length(cost, {tour, true});
    if (new_length > best_known_length) {
      std::reverse(tour.begin() + best_i + 1, tour.begin() + best_j + 1);
      recompute_nodes();
      break;
    }
    best_known_length = new_length;
  }
  return {tour, true};
}

struct HeldKarpResult {
  Tour tour;  // closed, starts at node 0, lexicographically smaller direction
  double length = 0.0;
};

// Exact optimal closed tour by dynamic programming over subsets. N <= 16.
inline HeldKarpResult held_karp_oracle(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.size());
  if (n < 2) throw InputError("Held-Karp needs at least 2 nodes");
  if (n > 16) throw InputError("Held-Karp oracle refuses N > 16");

  const int full = 1 << n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(static_cast<std::size_t>(full) * static_cast<std::size_t>(n), kInf);
  std::vector<int> parent(static_cast<std::size_t>(full) * static_cast<std::size_t>(n), -1);
  auto at = [n](int mask, int j) {
    return static_cast<std::size_t>(mask) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(j);
  };

  for (int j = 1; j < n; ++j)
    dp[at((1 << 0) | (1 << j), j)] = cost[0][static_cast<std::size_t>(j)];
  for (int mask = 0; mask < full; ++mask) {
    if (!(mask & 1)) continue;
    for (int j = 1; j < n; ++j) {
      if (!(mask & (1 << j))) continue;
      const double base = dp[at(mask, j)];
      if (base == kInf) continue;
      for (int k = 1; k < n; ++k) {
        if (mask & (1 << k)) continue;
        const double cand = base + cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        const int next = mask | (1 << k);
        if (cand < dp[at(next, k)]) {
          dp[at(next, k)] = cand;
          parent[at(next, k)] = j;
        }
      }
    }
  }

  HeldKarpResult result;
  if (n == 2) {
    result.tour = {{0, 1}, true};
    result.length = 2.0 * cost[0][1];
    return result;
  }
  int best_j = -1;
  double best = kInf;
  for (int j = 1; j < n; ++j) {
    const double cand = dp[at(full - 1, j)] + cost[static_cast<std::size_t>(j)][0];
    if (cand < best) {
      best = cand;
      best_j = j;
    }
  }
  std::vector<int> seq;
  int mask = full - 1, j = best_j;
  while (j != -1) {
    seq.push_back(j);
    const int p = parent[at(mask, j)];
    mask ^= 1 << j;
    j = p;
  }
  seq.push_back(0);
  std::reverse(seq.begin(), seq.end());  // 0, ..., best_j

  // Canonical orientation: keep the lexicographically smaller direction.
  std::vector<int> reversed(seq);
  std::reverse(reversed.begin() + 1, reversed.end());
  result.tour.nodes = std::min(seq, reversed);
  result.tour.closed = true;
  result.length = best;
  return result;
}

// ---------------------------------------------------------------------------
// Instance helpers for experiments.
// ---------------------------------------------------------------------------

inline std::vector<std::array<double, 2>> random_points(int n, RngStream stream) {
  std::vector<std::array<double, 2>> points(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    points[static_cast<std::size_t>(i)][0] = stream.next_uniform();
    points[static_cast<std::size_t>(i)][1] = stream.next_uniform();
  }
  return points;
}

inline CostMatrix euclidean_costs(const std::vector<std::array<double, 2>>& points) {
  const std::size_t n = points.size();
  CostMatrix cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = points[i][0] - points[j][0];
      const double dy = points[i][1] - points[j][1];
      const double d = std::sqrt(dx * dx + dy * dy);
      cost[i][j] = d;
      cost[j][i] = d;
    }
  return cost;
}

inline Tour random_closed_tour(int n, RngStream stream) {
  Tour tour;
  tour.closed = true;
  tour.nodes.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) tour.nodes[static_cast<std::size_t>(i)] = i;
  for (int k = 0; k < n - 1; ++k) {
    const int pick = k + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(n - k)));
    std::swap(tour.nodes[static_cast<std::size_t>(k)], tour.nodes[static_cast<std::size_t>(pick)]);
  }
  return tour;
}

}  // namespace permapprox
