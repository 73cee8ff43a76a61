#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pine/milp.hpp"

using namespace pine;
using namespace pine::milp;

namespace {

constexpr double kBig = std::numeric_limits<double>::infinity();

double lhs(const std::vector<Term>& terms, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& t : terms) s += t.coef * x[static_cast<std::size_t>(t.var)];
  return s;
}

bool holds(Relation rel, double v, double rhs, double tol) {
  switch (rel) {
    case Relation::LessEqual: return v <= rhs + tol;
    case Relation::GreaterEqual: return v >= rhs - tol;
    case Relation::Equal: return std::abs(v - rhs) <= tol;
  }
  return false;
}

struct Brute {
  bool feasible = false;
  double objective = 0.0;
};

// Exhaustive search over binaries. The model may carry one trailing continuous
// variable; for each binary assignment its feasible interval is intersected
// constraint by constraint and the objective optimised at an endpoint.
Brute brute_force(const MilpModel& m) {
  const auto& vars = m.variables();
  const bool has_y = !vars.empty() && vars.back().kind == VarKind::Continuous;
  const std::size_t k = vars.size() - (has_y ? 1 : 0);
  const int y = static_cast<int>(k);
  const double dir = m.objective().sense == Sense::Maximize ? 1.0 : -1.0;
  Brute out;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    std::vector<double> x(vars.size(), 0.0);
    for (std::size_t j = 0; j < k; ++j) x[j] = (mask >> j) & 1u;
    double lo = has_y ? vars.back().lower : 0.0;
    double hi = has_y ? vars.back().upper : 0.0;
    bool ok = true;
    for (const auto& c : m.constraints()) {
      double a = 0.0, rest = 0.0;
      for (const auto& t : c.terms) {
        if (t.var == y) a += t.coef;
        else rest += t.coef * x[static_cast<std::size_t>(t.var)];
      }
      const double r = c.rhs - rest;
      if (a == 0.0) {
        ok = ok && holds(c.relation, 0.0, r, 1e-12);
        continue;
      }
      const double b = r / a;
      const bool upper = (c.relation == Relation::LessEqual) == (a > 0);
      if (c.relation == Relation::Equal) {
        lo = std::max(lo, b);
        hi = std::min(hi, b);
      } else if (upper) {
        hi = std::min(hi, b);
      } else {
        lo = std::max(lo, b);
      }
    }
    if (!ok || lo > hi + 1e-12) continue;
    double cy = 0.0;
    for (const auto& t : m.objective().terms)
      if (t.var == y) cy += t.coef;
    if (has_y) x[k] = dir * cy >= 0 ? hi : lo;
    const double z = lhs(m.objective().terms, x) + m.objective().constant;
    if (!out.feasible || dir * z > dir * out.objective) out = {true, z};
  }
  return out;
}

MilpModel random_model(std::mt19937_64& rng, int k, bool with_continuous) {
  MilpModel m;
  std::uniform_int_distribution<int> coef(-4, 4);
  std::uniform_real_distribution<double> real(-3.0, 3.0);
  for (int j = 0; j < k; ++j) m.add_binary("x" + std::to_string(j));
  if (with_continuous) m.add_continuous("y", -2.0, 3.0);
  const int n = static_cast<int>(m.n_variables());
  const int n_cons = std::uniform_int_distribution<int>(0, k + 2)(rng);
  for (int i = 0; i < n_cons; ++i) {
    std::vector<Term> terms;
    for (int j = 0; j < n; ++j)
      if (rng() % 2) terms.push_back({j, static_cast<double>(coef(rng))});
    const auto rel = static_cast<Relation>(rng() % 10 == 0 ? 2 : rng() % 2);
    double rhs = static_cast<double>(std::uniform_int_distribution<int>(-3, 5)(rng));
    if (rel == Relation::Equal) rhs = static_cast<double>(std::uniform_int_distribution<int>(0, 2)(rng));
    m.add_constraint(std::move(terms), rel, rhs);
  }
  std::vector<Term> obj;
  for (int j = 0; j < n; ++j) obj.push_back({j, std::round(real(rng) * 1000.0) / 1000.0});
  m.set_objective(rng() % 2 ? Sense::Maximize : Sense::Minimize, std::move(obj), 0.5);
  return m;
}

}  // namespace

TEST(Milp, MaxSingleBinary) {
  MilpModel m;
  const int x = m.add_binary("x");
  m.set_objective(Sense::Maximize, {{x, 1.0}});
  const auto s = solve(m);
  EXPECT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_DOUBLE_EQ(s.values[0], 1.0);
  EXPECT_DOUBLE_EQ(s.objective, 1.0);
}

TEST(Milp, ContradictoryBoundsInfeasible) {
  MilpModel m;
  const int x = m.add_continuous("x", -kBig, kBig);
  m.add_constraint({{x, 1.0}}, Relation::GreaterEqual, 1.0);
  m.add_constraint({{x, 1.0}}, Relation::LessEqual, 0.0);
  m.set_objective(Sense::Minimize, {});
  EXPECT_EQ(solve(m).status, SolveStatus::Infeasible);
}

TEST(Milp, UnboundedRelaxationThrows) {
  MilpModel m;
  const int x = m.add_continuous("x", 0.0, kBig);
  m.set_objective(Sense::Maximize, {{x, 1.0}});
  try {
    solve(m);
    FAIL() << "expected Unbounded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Unbounded);
  }
}

TEST(Milp, MalformedModelRejected) {
  MilpModel m;
  m.add_binary("x");
  m.add_constraint({{3, 1.0}}, Relation::LessEqual, 1.0);
  try {
    solve(m);
    FAIL() << "expected MalformedModel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedModel);
  }
}

TEST(Milp, ZeroTimeLimitIsUncertified) {
  MilpModel m;
  const int x = m.add_binary("x");
  m.set_objective(Sense::Maximize, {{x, 1.0}});
  SolveOptions o;
  o.limits.time_limit_s = 0.0;
  const auto s = solve(m, o);
  EXPECT_EQ(s.status, SolveStatus::TimeLimit);
  EXPECT_FALSE(s.certified());
}

TEST(Milp, InitialSolutionKeptUnderNodeLimit) {
  MilpModel m;
  std::vector<Term> sum;
  for (int j = 0; j < 6; ++j) sum.push_back({m.add_binary("x" + std::to_string(j)), 1.0});
  m.add_constraint(sum, Relation::LessEqual, 2.5);
  m.set_objective(Sense::Maximize, sum);
  SolveOptions o;
  o.limits.node_limit = 0;
  o.initial_solution = {1, 0, 0, 0, 0, 0};
  const auto s = solve(m, o);
  EXPECT_EQ(s.status, SolveStatus::IterLimit);
  ASSERT_TRUE(s.has_incumbent());
  EXPECT_GE(s.objective, 1.0);
}

TEST(Milp, AllBinaryModelsMatchEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 12);
    const auto m = random_model(rng, k, false);
    const auto expect = brute_force(m);
    const auto got = solve(m);
    ASSERT_TRUE(got.certified()) << "trial " << trial;
    ASSERT_EQ(got.status == SolveStatus::Optimal, expect.feasible) << "trial " << trial << "\n" << export_lp(m);
    if (expect.feasible) {
      EXPECT_NEAR(got.objective, expect.objective, 1e-9) << "trial " << trial << "\n" << export_lp(m);
      EXPECT_LE(max_violation(m, got.values, 1e-6), 1e-7);
    }
  }
}

TEST(Milp, MixedModelsMatchEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const auto m = random_model(rng, k, true);
    const auto expect = brute_force(m);
    const auto got = solve(m);
    ASSERT_TRUE(got.certified());
    ASSERT_EQ(got.status == SolveStatus::Optimal, expect.feasible) << "trial " << trial << "\n" << export_lp(m);
    if (expect.feasible) {
      EXPECT_NEAR(got.objective, expect.objective, 1e-7) << "trial " << trial << "\n" << export_lp(m);
    }
  }
}

TEST(Milp, OptimalSolutionsSatisfyConstraints) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(rng, 1 + static_cast<int>(rng() % 10), rng() % 2 == 0);
    const auto s = solve(m);
    if (s.status == SolveStatus::Optimal) {
      EXPECT_LE(max_violation(m, s.values, 1e-6), 1e-7);
    }
  }
}

TEST(Milp, RemovingConstraintNeverWorsens) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(rng, 2 + static_cast<int>(rng() % 9), false);
    if (m.n_constraints() == 0) continue;
    MilpModel relaxed;
    for (const auto& v : m.variables()) relaxed.add_variable(v);
    for (std::size_t i = 1; i < m.n_constraints(); ++i) {
      const auto& c = m.constraints()[i];
      relaxed.add_constraint(c.terms, c.relation, c.rhs, c.name);
    }
    relaxed.set_objective(m.objective().sense, m.objective().terms, m.objective().constant);
    const auto a = solve(m);
    const auto b = solve(relaxed);
    if (a.status != SolveStatus::Optimal) continue;
    ASSERT_EQ(b.status, SolveStatus::Optimal);
    if (m.objective().sense == Sense::Minimize) EXPECT_LE(b.objective, a.objective + 1e-9);
    else EXPECT_GE(b.objective, a.objective - 1e-9);
  }
}

// Continuous LPs in two variables against vertex enumeration.
TEST(Milp, TwoVariableLpMatchesVertexEnumeration) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    MilpModel m;
    m.add_continuous("a", -3.0, 3.0);
    m.add_continuous("b", -3.0, 3.0);
    struct Line {
      double p, q, r;
      Relation rel;
    };
    std::vector<Line> lines{{1, 0, -3, Relation::GreaterEqual}, {1, 0, 3, Relation::LessEqual},
                            {0, 1, -3, Relation::GreaterEqual}, {0, 1, 3, Relation::LessEqual}};
    const int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      Line l{u(rng), u(rng), u(rng), rng() % 2 ? Relation::LessEqual : Relation::GreaterEqual};
      lines.push_back(l);
      m.add_constraint({{0, l.p}, {1, l.q}}, l.rel, l.r);
    }
    const double ca = u(rng), cb = u(rng);
    m.set_objective(Sense::Minimize, {{0, ca}, {1, cb}});
    bool any = false;
    double best = kBig;
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        const double det = lines[i].p * lines[j].q - lines[i].q * lines[j].p;
        if (std::abs(det) < 1e-12) continue;
        const double a = (lines[i].r * lines[j].q - lines[i].q * lines[j].r) / det;
        const double b = (lines[i].p * lines[j].r - lines[i].r * lines[j].p) / det;
        bool ok = true;
        for (const auto& l : lines) ok = ok && holds(l.rel, l.p * a + l.q * b, l.r, 1e-9);
        if (!ok) continue;
        any = true;
        best = std::min(best, ca * a + cb * b);
      }
    const auto s = solve(m);
    ASSERT_EQ(s.status == SolveStatus::Optimal, any) << "trial " << trial;
    if (any) {
      EXPECT_NEAR(s.objective, best, 1e-7) << "trial " << trial;
    }
  }
}

TEST(MilpExport, EmptyModelIsHeaderOnly) {
  EXPECT_EQ(export_lp(MilpModel{}), "\\ pine MILP export\nMinimize\nSubject To\nBounds\nEnd\n");
}

TEST(MilpExport, SingleVariableGolden) {
  MilpModel m;
  const int x = m.add_binary("x");
  m.add_constraint({{x, 2.0}}, Relation::LessEqual, 1.5, "cap");
  m.set_objective(Sense::Maximize, {{x, 3.0}});
  EXPECT_EQ(export_lp(m),
            "\\ pine MILP export\n"
            "Maximize\n"
            " obj: + 3 x\n"
            "Subject To\n"
            " cap: + 2 x <= 1.5\n"
            "Bounds\n"
            " 0 <= x <= 1\n"
            "Binaries\n"
            " x\n"
            "End\n");
}

TEST(MilpExport, RoundTripRandomModels) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_model(rng, 1 + static_cast<int>(rng() % 6), rng() % 2 == 0);
    m.add_continuous("free_var", -kBig, kBig);
    const auto back = parse_lp(export_lp(m));
    EXPECT_EQ(back, m) << export_lp(m) << "\n---\n" << export_lp(back);
  }
}

TEST(MilpExport, SolutionJsonHasAuditFields) {
  MilpModel m;
  const int x = m.add_binary("x");
  m.set_objective(Sense::Maximize, {{x, 1.0}});
  const auto j = solution_to_json(m, solve(m));
  EXPECT_EQ(j["status"], "Optimal");
  EXPECT_EQ(j["values"]["x"], 1.0);
  EXPECT_TRUE(j.contains("gap"));
  EXPECT_TRUE(j.contains("wall_time_s"));
}
