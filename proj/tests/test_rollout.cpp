// Tests for the clique-product rollout scorer. The closed form
//   log value = C(n-1, k-1) * sum(log a_i) + 1, score = log_value/3 + log n
// is validated against an independent enumeration of every k-subset clique in
// the linear domain.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "permapprox/rollout.hpp"

using namespace permapprox;

namespace {

// Independent oracle: enumerate all k-subsets, multiply the members into each
// clique product together with the e^(1/C(n,k)) constant, multiply the clique
// values, and return cbrt(value) * n in the linear domain.
double enumerate_clique_score(const std::vector<double>& acts, int clique_size) {
  const int n = static_cast<int>(acts.size());
  const int k = std::min(clique_size, n);
  std::vector<int> idx(static_cast<std::size_t>(k));
  double log_value = 0.0;
  const double cliques = binomial(n, k);
  // Recursive k-subset enumeration.
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == k) {
      double clique = std::exp(1.0 / cliques);
      for (int i = 0; i < k; ++i) clique *= acts[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      log_value += std::log(clique);
      return;
    }
    for (int i = start; i < n; ++i) {
      idx[static_cast<std::size_t>(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return log_value / 3.0 + std::log(static_cast<double>(n));
}

}  // namespace

TEST_CASE("binomial coefficients") {
  CHECK(binomial(0, 0) == doctest::Approx(1.0));
  CHECK(binomial(4, 2) == doctest::Approx(6.0));
  CHECK(binomial(5, 0) == doctest::Approx(1.0));
  CHECK(binomial(5, 5) == doctest::Approx(1.0));
  CHECK(binomial(6, 3) == doctest::Approx(20.0));
  CHECK(binomial(3, 4) == doctest::Approx(0.0));
  CHECK(binomial(3, -1) == doctest::Approx(0.0));
}

TEST_CASE("closed form equals the enumerated clique product") {
  const std::vector<std::vector<double>> inputs = {
      {0.5},
      {0.5, 0.25},
      {0.9, 0.1, 0.4},
      {1.0, 0.7, 0.3, 0.2},
      {0.8, 0.6, 0.4, 0.2, 0.9},
      {0.05, 1.1, 0.33, 0.77, 0.5},
  };
  for (const auto& acts : inputs) {
    for (int k = 1; k <= 5; ++k) {
      const LogScore got = clique_log_score(acts, k);
      const double want = enumerate_clique_score(acts, k);
      REQUIRE(!got.is_impossible());
      CHECK(got.value == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("clique score is permutation invariant") {
  const LogScore a = clique_log_score({0.2, 0.5, 0.8}, 3);
  const LogScore b = clique_log_score({0.8, 0.2, 0.5}, 3);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-15));
}

TEST_CASE("clique size larger than the activation count degrades to k = n") {
  const std::vector<double> acts{0.4, 0.6};
  CHECK(clique_log_score(acts, 3).value ==
        doctest::Approx(clique_log_score(acts, 2).value).epsilon(1e-15));
}

TEST_CASE("empty or nonpositive activations are unscorable") {
  CHECK(clique_log_score({}, 3).is_impossible());
  CHECK(clique_log_score({0.5, 0.0}, 3).is_impossible());
  CHECK(clique_log_score({0.5, -0.1}, 3).is_impossible());
}

TEST_CASE("single activation reduces to log(a)/3 + 1/3") {
  // n = 1, k = 1: log value = log(a) + 1, score = (log a + 1)/3 + log 1.
  const LogScore s = clique_log_score({0.5}, 3);
  CHECK(s.value == doctest::Approx((std::log(0.5) + 1.0) / 3.0));
}

TEST_CASE("pseudo_state_rollout composes activation and clique scoring") {
  TppModel m;
  m.states = {"S", "R"};
  m.emissions = {{{"a", 0.5}, {"b", 0.7}}, {{"a", 0.9}}};
  m.transitions = {{0.5, 0.5}, {0.5, 0.5}};
  const ActivationSpec spec = ActivationSpec::rollout();
  const RngStream stream = RngStream(42).child("ep0");

  const RolloutScore rs = pseudo_state_rollout(m, 0, {"a", "b"}, 3, spec, stream);
  CHECK(rs.tokens == 2);
  const auto acts = rollout_activation(m, 0, {"a", "b"}, spec, stream);
  REQUIRE(acts.size() == 2);
  CHECK(rs.score.value ==
        doctest::Approx(clique_log_score(acts, 3).value).epsilon(1e-15));

  // A token the state cannot emit is impossible, but still counts tokens.
  const RolloutScore bad = pseudo_state_rollout(m, 1, {"a", "b"}, 3, spec, stream);
  CHECK(bad.score.is_impossible());
  CHECK(bad.tokens == 2);

  CHECK_THROWS_AS(pseudo_state_rollout(m, 0, {"a"}, 0, spec, stream), InputError);
}

TEST_CASE("episode_scores keys streams by episode index and state content") {
  TppModel m;
  m.states = {"A", "B"};
  m.emissions = {{{"x", 0.6}}, {{"x", 0.3}}};
  m.transitions = {{0.5, 0.5}, {0.5, 0.5}};
  ObservationTrail trail;
  trail.episodes = {{"x"}, {"x"}};
  const RngStream rep = RngStream(9).child("rep").child(0);

  const auto fwd = episode_scores(m, trail, {0, 1}, 3, ActivationSpec::rollout(), rep);
  const auto rev = episode_scores(m, trail, {1, 0}, 3, ActivationSpec::rollout(), rep);
  REQUIRE(fwd.size() == 2);
  REQUIRE(rev.size() == 2);

  // Position t scored as state s must reproduce the direct computation on
  // rollout_stream(rep, t, s) regardless of the arrangement it came from.
  const RolloutScore direct = pseudo_state_rollout(m, 0, trail.episodes[0], 3,
                                                   ActivationSpec::rollout(),
                                                   rollout_stream(rep, 0, 0));
  CHECK(fwd[0].score.value == doctest::Approx(direct.score.value).epsilon(1e-15));
  // Same state at a different episode index draws from a different stream.
  CHECK(fwd[0].score.value != rev[1].score.value);
}
