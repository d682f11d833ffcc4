#pragma once

// Real-valued observation mode. States model each observation component with
// a distribution (Gaussian parameters or an empirical sample set); episodes
// are fixed-dimension real vectors. The search skeleton is the discrete
// solver's; episode scoring multiplies closeness heuristics over 3-subsets of
// component indices, and the dropout capacity uses inverse energy distance
// between state distributions per component.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "permapprox/activation.hpp"
#include "permapprox/common.hpp"
#include "permapprox/dropout.hpp"
#include "permapprox/model.hpp"
#include "permapprox/rng.hpp"
#include "permapprox/rollout.hpp"
#include "permapprox/solver.hpp"

namespace permapprox {

struct RealDist {
  enum class Kind { kGaussian, kSamples };
  Kind kind = Kind::kGaussian;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> samples;

  static RealDist gaussian(double mean, double std) {
    RealDist d;
    d.kind = Kind::kGaussian;
    d.mean = mean;
    d.std = std;
    return d;
  }
  static RealDist empirical(std::vector<double> samples) {
    RealDist d;
    d.kind = Kind::kSamples;
    d.samples = std::move(samples);
    return d;
  }
};

struct TppRealModel {
  std::vector<std::string> states;
  // dists[state][index]: distribution of observation component `index`.
  std::vector<std::vector<RealDist>> dists;
  std::vector<std::vector<double>> transitions;

  int num_states() const { return static_cast<int>(states.size()); }
  int dim() const { return dists.empty() ? 0 : static_cast<int>(dists[0].size()); }
};

inline std::vector<std::string> validate_real_model(const TppRealModel& model) {
  std::vector<std::string> violations;
  const std::size_t n = model.states.size();
  if (n == 0) violations.push_back("model has no states");
  if (model.dists.size() != n)
    violations.push_back("distribution table count does not match state count");
  const std::size_t dim = model.dists.empty() ? 0 : model.dists[0].size();
  for (std::size_t i = 0; i < model.dists.size(); ++i) {
    if (model.dists[i].size() != dim)
      violations.push_back("state '" + model.states[i] + "' has inconsistent dimension");
    for (std::size_t d = 0; d < model.dists[i].size(); ++d) {
      const RealDist& dist = model.dists[i][d];
      if (dist.kind == RealDist::Kind::kGaussian && dist.std < 0.0)
        violations.push_back("state '" + model.states[i] + "' component " +
                             std::to_string(d) + ": negative standard deviation");
      if (dist.kind == RealDist::Kind::kSamples && dist.samples.empty())
        violations.push_back("state '" + model.states[i] + "' component " +
                             std::to_string(d) + ": empty sample set");
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
    for (double v : row) {
      if (v < 0.0)
        violations.push_back("negative transition probability in row " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      violations.push_back("row " + std::to_string(i) + " sums to " + detail::fmt_g(sum));
  }
  return violations;
}

// Closeness heuristic of one component value under one distribution.
inline double rv_heuristic(const RealDist& dist, double value, const MlaaConfig& config) {
  if (dist.kind == RealDist::Kind::kGaussian)
    return model_heuristic_gaussian(dist.mean, dist.std, value, config.rv_thresh,
                                    config.rv_literal_z);
  return model_heuristic_samples(dist.samples, value);
}

// Real-valued episode score: with D components and k = min(3, D), every
// component index appears in C(D-1, k-1) of the k-subsets, so the log of the
// product over all subsets collapses to C(D-1, k-1) * sum(log h_i). Fully
// deterministic (no draws, no constants).
inline LogScore rv_rollout_score(const TppRealModel& model, int state,
                                 const std::vector<double>& episode,
                                 const MlaaConfig& config) {
  const int d = static_cast<int>(episode.size());
  if (d == 0) return LogScore{};
  const int k = std::min(3, d);
  double sum_log = 0.0;
  for (int ind = 0; ind < d; ++ind) {
    const double h = rv_heuristic(model.dists[static_cast<std::size_t>(state)]
                                             [static_cast<std::size_t>(ind)],
                                  episode[static_cast<std::size_t>(ind)], config);
    if (h <= 0.0) return LogScore{};
    sum_log += std::log(h);
  }
  return LogScore::from_log(binomial(d - 1, k - 1) * sum_log);
}

namespace detail {
// Sample sets standing in for each (state, component) distribution. Gaussians
// draw config.energy_samples values keyed (state, index); empirical sets pass
// through unchanged.
inline std::vector<std::vector<std::vector<double>>> rv_sample_sets(
    const TppRealModel& model, const MlaaConfig& config, const RngStream& rep) {
  const RngStream base = rep.child("rv-samples");
  std::vector<std::vector<std::vector<double>>> sets(model.dists.size());
  for (std::size_t s = 0; s < model.dists.size(); ++s) {
    sets[s].resize(model.dists[s].size());
    for (std::size_t d = 0; d < model.dists[s].size(); ++d) {
      const RealDist& dist = model.dists[s][d];
      if (dist.kind == RealDist::Kind::kSamples) {
        sets[s][d] = dist.samples;
        continue;
      }
      RngStream stream = base.child(static_cast<std::uint64_t>(s)).child(static_cast<std::uint64_t>(d));
      auto& out = sets[s][d];
      out.resize(static_cast<std::size_t>(config.energy_samples));
      for (int i = 0; i < config.energy_samples; ++i)
        out[static_cast<std::size_t>(i)] = stream.next_normal(dist.mean, dist.std);
    }
  }
  return sets;
}
}  // namespace detail

// Capacity matrix for the real-valued dropout filter: every episode x
// component x unordered state pair contributes 1 / max(eps, energy distance)
// between the two states' component distributions.
inline Matrix rv_transition_capacity(const TppRealModel& model, const ObservationTrail& trail,
                                     const MlaaConfig& config, const RngStream& rep) {
  const int n = model.num_states();
  Matrix cap(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  const auto sets = detail::rv_sample_sets(model, config, rep);
  const int dim = model.dim();

  // Distances are episode-independent; compute once per (index, pair).
  Matrix per_index_sum(static_cast<std::size_t>(n),
                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int ind = 0; ind < dim; ++ind)
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double dist = energy_distance(sets[static_cast<std::size_t>(a)][static_cast<std::size_t>(ind)],
                                            sets[static_cast<std::size_t>(b)][static_cast<std::size_t>(ind)]);
        const double act = 1.0 / std::max(kEps, dist);
        per_index_sum[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += act;
        per_index_sum[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] += act;
      }
  const double episodes = static_cast<double>(trail.episodes_real.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      cap[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          episodes * per_index_sum[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  return cap;
}

// Real-valued solve: identical skeleton to the discrete solver with the
// real-valued rollout and dropout kernels; attention is first order.
inline SolveResult solve_real_valued(const TppRealModel& model, const ObservationTrail& trail,
                                     const MlaaConfig& config_in) {
  const auto start = std::chrono::steady_clock::now();
  MlaaConfig config = config_in;
  config.attention = AttentionOrder::kFirst;

  const int n = model.num_states();
  const int t_len = trail.length();
  if (!trail.real_valued()) throw InputError("discrete trail passed to the real-valued solver");
  if (t_len < 1) throw InputError("trail is empty");
  if (t_len > n)
    throw InputError("trail length " + std::to_string(t_len) + " exceeds state count " +
                     std::to_string(n));
  const int dim = model.dim();
  for (const auto& ep : trail.episodes_real)
    if (static_cast<int>(ep.size()) != dim)
      throw InputError("episode dimension does not match the model");
  if (config.repetitions < 1) throw InputError("repetitions must be >= 1");
  const unsigned long long total = arrangement_count(n, t_len);
  if (total > config.cap)
    throw CapExceededError("arrangement count exceeds cap", total);

  std::vector<DropoutPredicate> preds(static_cast<std::size_t>(config.repetitions));
  std::vector<detail::ScanCaches> rep_caches(static_cast<std::size_t>(config.repetitions));

  const auto run_rep = [&](int r, RepOutcome& out) {
    const RngStream rep = rep_stream(config.seed, r);
    if (config.dropout_enabled)
      preds[static_cast<std::size_t>(r)] =
          predicate_from_capacity(rv_transition_capacity(model, trail, config, rep),
                                  model.transitions, t_len, config.literal_pop);
    auto& caches = rep_caches[static_cast<std::size_t>(r)];
    caches.n = n;
    caches.t = t_len;
    caches.rollout.resize(static_cast<std::size_t>(t_len) * static_cast<std::size_t>(n));
    for (int t = 0; t < t_len; ++t)
      for (int state = 0; state < n; ++state)
        caches.rollout[static_cast<std::size_t>(t * n + state)] =
            rv_rollout_score(model, state, trail.episodes_real[static_cast<std::size_t>(t)],
                             config);
    detail::prefetch_transitions(model.transitions, t_len, config.attention,
                                 config.transition_spec, rep, caches);
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
