#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace pine;

namespace {

// Binomial CDF by direct summation of exact term ratios, independent of lgamma.
double cdf_by_recurrence(std::size_t k, std::size_t n, double q) {
  double term = std::pow(1.0 - q, static_cast<double>(n));
  double s = term;
  for (std::size_t i = 1; i <= k; ++i) {
    term *= static_cast<double>(n - i + 1) / static_cast<double>(i) * q / (1.0 - q);
    s += term;
  }
  return s;
}

double bisect_upper(std::size_t k, std::size_t n, double eta) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf_by_recurrence(k, n, mid) > eta ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

TEST(Evaluate, IdenticalWeightsFullFidelity) {
  const auto inst = fixtures::random_instance(1);
  const auto r = evaluate(inst.ensemble, inst.ensemble.weights, inst.ensemble.weights, inst.cal);
  EXPECT_EQ(r.fidelity, 1.0);
  ASSERT_TRUE(r.fidelity_id.has_value());
  EXPECT_EQ(*r.fidelity_id, 1.0);
  EXPECT_EQ(r.pruning_rate, 0.0);
  EXPECT_EQ(r.compression_ratio, 1.0);
}

TEST(Evaluate, HandCountedFourPoints) {
  // Stumps at 0.5 and 1.0; w = (2, 0) flips only (0.5, 1.0].
  const auto e = make_ensemble(
      {Tree::stump(0, 0.5, {1.0, -1.0}, {-1.0, 1.0}), Tree::stump(0, 1.0, {1.5, -1.5}, {-1.5, 1.5})}, 2, 1);
  const ScoreModel cl = make_chow_liu(BinGrid{{{0.5}}, {false}}, 0, {-1}, {0.8, 0.2}, {{}});
  const Dataset test(1, {0.1, 0.2, 0.7, 2.0}, {0, 0, 0, 1});
  const std::vector<double> w{2.0, 0.0};
  const auto r = evaluate(e, e.weights, w, test, Region{&cl, Tau::finite(1.0)});
  EXPECT_EQ(r.fidelity, 0.75);
  EXPECT_EQ(r.coverage, 0.5);
  ASSERT_TRUE(r.fidelity_id.has_value());
  EXPECT_EQ(*r.fidelity_id, 1.0);
  EXPECT_EQ(*r.accuracy_original, 1.0);
  EXPECT_EQ(*r.accuracy_pruned, 0.75);
  EXPECT_GE(r.fidelity, r.coverage * *r.fidelity_id);
}

TEST(Evaluate, UndefinedConditionalFidelityWhenRegionEmpty) {
  const auto e = make_ensemble({Tree::stump(0, 0.5, {1.0, -1.0}, {-1.0, 1.0})}, 2, 1);
  const ScoreModel cl = make_chow_liu(BinGrid{{{0.5}}, {false}}, 0, {-1}, {0.5, 0.5}, {{}});
  const auto r = evaluate(e, e.weights, e.weights, Dataset(1, {0.1, 0.9}), Region{&cl, Tau::finite(0.1)});
  EXPECT_FALSE(r.fidelity_id.has_value());
  EXPECT_EQ(eval_report_to_json(r).at("fidelity_id"), "undefined");
  EXPECT_THROW(evaluate(e, e.weights, e.weights, Dataset{}), Error);
}

TEST(Evaluate, PruningRateThirtyToEleven) {
  std::vector<Tree> t(30, Tree::single_leaf({0.0, 1.0}));
  const auto e = make_ensemble(t, 2, 1);
  std::vector<double> w(30, 0.0);
  for (int i = 0; i < 11; ++i) w[static_cast<std::size_t>(i)] = 30.0 / 11.0;
  const auto r = evaluate(e, e.weights, w, Dataset(1, {0.0}));
  EXPECT_NEAR(r.pruning_rate, 19.0 / 30.0, 1e-12);
  EXPECT_NEAR(r.compression_ratio, 30.0 / 11.0, 1e-12);
}

TEST(Evaluate, FidelityDominatesCoverageTimesConditional) {
  SplitMix64 rng(4);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto inst = fixtures::random_instance(s);
    ScoreParams sp;
    sp.kind = ScoreKind::LeafSupport;
    const auto sm = fit_score(inst.ensemble, inst.fit, sp);
    std::vector<double> w(inst.ensemble.size());
    for (auto& v : w) v = rng.uniform01();
    const auto r = evaluate(inst.ensemble, inst.ensemble.weights, w, inst.fit, Region{&sm, Tau::finite(rng.uniform(0.5, 5.0))});
    if (r.fidelity_id) {
      EXPECT_GE(r.matches, r.in_region_matches);
    }
    EXPECT_GE(r.fidelity + 1e-15, r.coverage * r.fidelity_id.value_or(0.0));
  }
}

TEST(ClopperPearson, ZeroMismatchClosedForm) {
  for (std::size_t n : {1u, 10u, 100u})
    for (double eta : {0.01, 0.025, 0.05, 0.5}) EXPECT_NEAR(clopper_pearson_upper(0, n, eta), 1.0 - std::pow(eta, 1.0 / n), 1e-9);
}

TEST(ClopperPearson, AllMismatchIsOne) {
  for (std::size_t n : {1u, 10u, 100u}) EXPECT_EQ(clopper_pearson_upper(n, n, 0.05), 1.0);
}

TEST(ClopperPearson, MatchesIndependentBisection) {
  EXPECT_NEAR(clopper_pearson_upper(1, 20, 0.05), bisect_upper(1, 20, 0.05), 1e-8);
  for (std::size_t n : {5u, 20u, 60u})
    for (std::size_t k = 0; k < n; k += 3) EXPECT_NEAR(clopper_pearson_upper(k, n, 0.1), bisect_upper(k, n, 0.1), 1e-8);
}

TEST(ClopperPearson, Monotonicity) {
  for (std::size_t n : {10u, 40u}) {
    double prev = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double u = clopper_pearson_upper(k, n, 0.05);
      EXPECT_GE(u, prev - 1e-12);
      EXPECT_GE(u, static_cast<double>(k) / static_cast<double>(n));
      prev = u;
    }
  }
  EXPECT_GE(clopper_pearson_upper(3, 20, 0.05), clopper_pearson_upper(3, 40, 0.05));
  EXPECT_GE(clopper_pearson_upper(3, 20, 0.01), clopper_pearson_upper(3, 20, 0.05));
  EXPECT_THROW(clopper_pearson_upper(5, 4, 0.05), Error);
}

TEST(SelectAlpha, AllZeroMismatchesPickLargest) {
  std::vector<AlphaCandidate> c;
  for (double a : default_selection_grid()) c.push_back({a, 0, 50});
  const auto r = select_alpha(c, {});
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.alpha, 0.95);
}

TEST(SelectAlpha, EmpiricalRejectsTenPercentRisk) {
  const auto r = select_alpha({{0.1, 0, 100}, {0.5, 10, 100}}, {0.95, SelectorKind::Empirical, 0.05});
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.alpha, 0.1);
}

TEST(SelectAlpha, ConfidenceBoundFallsBack) {
  const AlphaSelection sel{0.99, SelectorKind::ConfidenceBound, 0.05};
  const auto r = select_alpha({{0.1, 0, 10}, {0.5, 0, 10}}, sel);
  EXPECT_TRUE(r.fallback);
  EXPECT_NEAR(r.statistic[0], 1.0 - std::pow(0.025, 0.1), 1e-9);
}

TEST(SelectAlpha, ConfidenceBoundNeverExceedsEmpirical) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<AlphaCandidate> c;
    const std::size_t n = 20 + rng.bounded(200);
    for (double a : default_selection_grid()) c.push_back({a, rng.bounded(n / 10 + 1), n});
    const double rho = 0.8 + 0.19 * rng.uniform01();
    const auto emp = select_alpha(c, {rho, SelectorKind::Empirical, 0.05});
    const auto cb = select_alpha(c, {rho, SelectorKind::ConfidenceBound, 0.05});
    if (!cb.fallback) {
      ASSERT_FALSE(emp.fallback);
      EXPECT_LE(cb.alpha, emp.alpha);
    }
  }
}
