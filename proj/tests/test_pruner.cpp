#include <gtest/gtest.h>

#include <bit>
#include <numeric>
#include <vector>

#include "support.hpp"

using namespace pine;

namespace {

struct RandomProblem {
  Ensemble ensemble;
  std::vector<std::vector<double>> points;
};

RandomProblem random_problem(std::uint64_t seed, int max_trees = 8) {
  SplitMix64 rng(seed);
  const int C = 2 + static_cast<int>(rng.bounded(2));
  const int p = 1 + static_cast<int>(rng.bounded(3));
  const int M = 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(max_trees)));
  std::vector<Tree> trees;
  for (int m = 0; m < M; ++m) trees.push_back(fixtures::random_tree(rng, p, 2, C));
  RandomProblem r{make_ensemble(std::move(trees), C, p), {}};
  const auto n = 5 + rng.bounded(25);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<std::size_t>(p));
    for (auto& v : x) v = rng.uniform01();
    r.points.push_back(x);
  }
  return r;
}

// Whether some w >= 0 supported on `subset` with sum W meets every row:
// one LP per subset, built independently of the solver's own models.
bool subset_feasible(const PrunerProblem& p, const std::vector<int>& subset) {
  milp::MilpModel m;
  std::vector<int> var(p.n_trees(), -1);
  std::vector<milp::Term> sum;
  for (int t : subset) {
    var[static_cast<std::size_t>(t)] = m.add_continuous("w" + std::to_string(t), 0.0, p.w_total);
    sum.push_back({var[static_cast<std::size_t>(t)], 1.0});
  }
  m.add_constraint(sum, milp::Relation::Equal, p.w_total);
  for (const auto& r : p.rows) {
    std::vector<milp::Term> terms;
    for (int t : subset)
      if (r.coef[static_cast<std::size_t>(t)] != 0.0) terms.push_back({var[static_cast<std::size_t>(t)], r.coef[static_cast<std::size_t>(t)]});
    m.add_constraint(terms, milp::Relation::GreaterEqual, r.rhs);
  }
  const auto s = milp::solve(m);
  return s.status == milp::SolveStatus::Optimal;
}

std::size_t enumerate_min_support(const PrunerProblem& p) {
  const std::size_t M = p.n_trees();
  std::size_t best = M + 1;
  for (std::uint32_t mask = 1; mask < (1u << M); ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    if (k >= best) continue;
    std::vector<int> subset;
    for (std::size_t t = 0; t < M; ++t)
      if (mask >> t & 1u) subset.push_back(static_cast<int>(t));
    if (subset_feasible(p, subset)) best = k;
  }
  return best;
}

void expect_preserves(const Ensemble& e, const PrunerProblem& p, const std::vector<double>& w) {
  for (std::size_t i = 0; i < p.cells.size(); ++i)
    EXPECT_EQ(class_from_leaves(e, w, p.cells[i]), p.classes[i]) << "cell " << i;
}

}  // namespace

TEST(Pruner, EmptySetKeepsOneTree) {
  const auto r = random_problem(1);
  const auto p = make_pruner_problem(r.ensemble, r.ensemble.weights, {}, {});
  const auto res = solve_pruner(p, {});
  EXPECT_EQ(res.support, 1u);
  EXPECT_TRUE(res.optimal);
  EXPECT_NEAR(std::accumulate(res.weights.begin(), res.weights.end(), 0.0), p.w_total, 1e-9);
}

TEST(Pruner, IdenticalTreesKeepOne) {
  SplitMix64 rng(3);
  const Tree t = fixtures::random_tree(rng, 2, 2, 2);
  const auto e = make_ensemble({t, t}, 2, 2);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform01(), rng.uniform01()});
  const auto p = make_pruner_problem(e, e.weights, leaf_tuples_of(e, pts), {});
  const auto res = solve_pruner(p, {});
  EXPECT_EQ(res.support, 1u);
  EXPECT_NEAR(std::max(res.weights[0], res.weights[1]), 2.0, 1e-9);
}

TEST(Pruner, OriginalWeightsFeasible) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto r = random_problem(s);
    PrunerProblem p;
    try {
      p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), {});
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InfeasibleAtEpsilon);
      continue;
    }
    EXPECT_TRUE(satisfies_rows(p, p.w0));
  }
}

TEST(Pruner, L0MatchesSubsetEnumeration) {
  int checked = 0;
  for (std::uint64_t s = 0; checked < 50; ++s) {
    const auto r = random_problem(1000 + s);
    PrunerProblem p;
    try {
      p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), {});
    } catch (const Error&) {
      continue;
    }
    ++checked;
    const auto res = solve_pruner(p, {});
    ASSERT_TRUE(res.optimal);
    EXPECT_EQ(res.support, enumerate_min_support(p)) << "seed " << 1000 + s;
    EXPECT_TRUE(satisfies_rows(p, res.weights, 1e-7));
    expect_preserves(r.ensemble, p, res.weights);
  }
}

TEST(Pruner, CutGenerationAgreesWithBigM) {
  int checked = 0;
  for (std::uint64_t s = 0; checked < 25; ++s) {
    const auto r = random_problem(5000 + s, 6);
    PrunerProblem p;
    try {
      p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), {});
    } catch (const Error&) {
      continue;
    }
    ++checked;
    PrunerOptions big;
    big.method = L0Method::BigM;
    const auto a = solve_pruner(p, {});
    const auto b = solve_pruner(p, big);
    ASSERT_TRUE(a.optimal && b.optimal);
    EXPECT_EQ(a.support, b.support);
    expect_preserves(r.ensemble, p, b.weights);
  }
}

TEST(Pruner, MonotoneInConstraintSet) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = random_problem(7000 + s);
    const auto tuples = leaf_tuples_of(r.ensemble, r.points);
    std::vector<std::vector<int>> half(tuples.begin(), tuples.begin() + static_cast<long>(tuples.size() / 2));
    PrunerOptions o;
    o.epsilon = 1e-6;
    PrunerProblem small, big;
    try {
      small = make_pruner_problem(r.ensemble, r.ensemble.weights, half, o);
      big = make_pruner_problem(r.ensemble, r.ensemble.weights, tuples, o);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LE(solve_pruner(small, o).support, solve_pruner(big, o).support);
  }
}

TEST(Pruner, L1PreservesAndIsNormalised) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto r = random_problem(9000 + s);
    PrunerOptions o;
    o.objective = PruneObjective::L1;
    PrunerProblem p;
    try {
      p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), o);
    } catch (const Error&) {
      continue;
    }
    const auto res = solve_pruner(p, o);
    ASSERT_TRUE(res.optimal);
    EXPECT_NEAR(std::accumulate(res.weights.begin(), res.weights.end(), 0.0), p.w_total, 1e-9);
    expect_preserves(r.ensemble, p, res.weights);
    // The pre-scaling optimum never exceeds the original total, which is feasible.
    EXPECT_LE(res.objective, p.w_total + 1e-9);
  }
}

TEST(Pruner, ZeroTimeLimitReturnsOriginalUncertified) {
  const auto r = random_problem(4);
  const auto p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), {});
  PrunerOptions o;
  o.limits.time_limit_s = 0.0;
  const auto res = solve_pruner(p, o);
  EXPECT_FALSE(res.optimal);
  EXPECT_EQ(res.status, milp::SolveStatus::TimeLimit);
  EXPECT_EQ(res.weights, p.w0);
}

TEST(Pruner, NearTieOriginalReportsInfeasibleAtEpsilon) {
  // Class 1 leads class 0 by 1e-30 while the largest leaf is 5: no margin
  // survives 20 halvings of 5e-6.
  auto e = make_ensemble({Tree::stump(0, 0.5, {0.0, 1e-30}, {5.0, 0.0})}, 2, 1);
  try {
    make_pruner_problem(e, e.weights, {{0}}, {});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::InfeasibleAtEpsilon);
  }
}

TEST(Pruner, ExportedBigMModelParses) {
  const auto r = random_problem(12, 4);
  const auto p = make_pruner_problem(r.ensemble, r.ensemble.weights, leaf_tuples_of(r.ensemble, r.points), {});
  const auto m = build_pruner_milp(p);
  const auto back = milp::parse_lp(milp::export_lp(m));
  EXPECT_EQ(back.n_variables(), m.n_variables());
  EXPECT_NEAR(milp::solve(back).objective, static_cast<double>(solve_pruner(p, {}).support), 1e-6);
}
