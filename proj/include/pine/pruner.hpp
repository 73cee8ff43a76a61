#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/log.hpp"
#include "pine/milp.hpp"

namespace pine {

enum class PruneObjective { L0, L1 };
enum class L0Method { CutGeneration, BigM };

inline std::string objective_name(PruneObjective o) { return o == PruneObjective::L0 ? "l0" : "l1"; }
inline PruneObjective parse_objective(const std::string& s) {
  if (s == "l0") return PruneObjective::L0;
  if (s == "l1") return PruneObjective::L1;
  throw Error(Errc::InvalidArgument, "unknown objective '" + s + "'");
}

struct PrunerOptions {
  PruneObjective objective = PruneObjective::L0;
  L0Method method = L0Method::CutGeneration;
  double epsilon = 0.0;  // 0 selects 1e-6 * max|leaf| * W_total
  milp::SolveLimits limits;
  milp::Tolerances tol;
};

/// One preservation constraint: sum_m coef[m] w_m >= rhs.
struct PruneRow {
  std::vector<double> coef;
  double rhs = 0.0;
};

/// The Pruner's input after deduplicating points by leaf tuple.
struct PrunerProblem {
  std::vector<double> w0;
  double w_total = 0.0;
  double epsilon = 0.0;
  PruneObjective objective = PruneObjective::L0;
  bool bias_free = true;  // predictions are then invariant to scaling w
  std::vector<std::vector<int>> cells;  // distinct leaf tuples
  std::vector<int> classes;             // original class per cell
  std::vector<PruneRow> rows;
  const Ensemble* ensemble = nullptr;  // for the exact class check; not owned
  std::size_t n_trees() const noexcept { return w0.size(); }
};

/// Whether w reproduces every cell's original class under exact prediction.
inline bool preserves_classes(const PrunerProblem& p, std::span<const double> w) {
  if (p.ensemble == nullptr) return true;
  for (std::size_t i = 0; i < p.cells.size(); ++i)
    if (class_from_leaves(*p.ensemble, w, p.cells[i]) != p.classes[i]) return false;
  return true;
}

struct PrunerResult {
  std::vector<double> weights;
  double epsilon = 0.0;
  double objective = 0.0;  // support size (L0) or weight sum (L1)
  bool optimal = false;
  milp::SolveStatus status = milp::SolveStatus::Optimal;
  std::size_t support = 0;
  std::size_t master_iterations = 0;
  double wall_time_s = 0.0;
};

/// Rows for every cell and every rival class: F_c - F_r >= eps for r < c
/// (ties go to the smaller index) and >= 0 for r > c. The non-strict rows also
/// use eps whenever w0 itself clears it, which keeps vertex solutions off
/// exact ties that floating-point evaluation could break either way. If w0
/// misses a strict margin, eps is halved up to 20 times.
inline PrunerProblem make_pruner_problem(const Ensemble& e, std::span<const double> w0,
                                         const std::vector<std::vector<int>>& leaf_tuples, const PrunerOptions& opts) {
  if (w0.size() != e.size()) throw Error(Errc::DimensionMismatch, "w0 length differs from tree count");
  PrunerProblem p;
  p.ensemble = &e;
  p.w0.assign(w0.begin(), w0.end());
  p.w_total = std::accumulate(w0.begin(), w0.end(), 0.0);
  p.objective = opts.objective;
  p.bias_free = std::all_of(e.bias.begin(), e.bias.end(), [](double b) { return b == 0.0; });
  if (!(p.w_total > 0.0)) throw Error(Errc::InvalidArgument, "original weights sum to zero");
  std::set<std::vector<int>> seen;
  for (const auto& t : leaf_tuples) {
    if (t.size() != e.size()) throw Error(Errc::DimensionMismatch, "leaf tuple length differs from tree count");
    if (seen.insert(t).second) p.cells.push_back(t);
  }
  const auto C = static_cast<std::size_t>(e.n_classes);
  struct Raw {
    std::vector<double> coef;
    double offset;  // bias difference
    double w0_margin;
    bool strict;
  };
  std::vector<Raw> raw;
  for (const auto& cell : p.cells) {
    const int c = class_from_leaves(e, w0, cell);
    p.classes.push_back(c);
    for (std::size_t r = 0; r < C; ++r) {
      if (static_cast<int>(r) == c) continue;
      Raw row{std::vector<double>(e.size()), e.bias[static_cast<std::size_t>(c)] - e.bias[r], 0.0,
              static_cast<int>(r) < c};
      double m0 = row.offset;
      for (std::size_t m = 0; m < e.size(); ++m) {
        const auto& v = e.trees[m].leaf_scores(cell[m]);
        row.coef[m] = v[static_cast<std::size_t>(c)] - v[r];
        m0 += w0[m] * row.coef[m];
      }
      row.w0_margin = m0;
      raw.push_back(std::move(row));
    }
  }
  double eps = opts.epsilon > 0.0 ? opts.epsilon : 1e-6 * e.max_abs_leaf() * p.w_total;
  if (!(eps > 0.0)) eps = 1e-9;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : raw)
    if (r.strict) worst = std::min(worst, r.w0_margin);
  int halvings = 0;
  while (worst < eps && halvings < 20) {
    eps /= 2.0;
    ++halvings;
  }
  if (worst < eps)
    throw Error(Errc::InfeasibleAtEpsilon, "original weights miss the strict margin (smallest margin " +
                                               std::to_string(worst) + ")");
  p.epsilon = eps;
  std::map<std::vector<double>, double> dedup;
  for (auto& r : raw) {
    const double margin = r.strict || r.w0_margin >= eps ? eps : 0.0;
    const double rhs = margin - r.offset;
    if (std::all_of(r.coef.begin(), r.coef.end(), [](double v) { return v == 0.0; })) continue;
    auto [it, fresh] = dedup.emplace(std::move(r.coef), rhs);
    if (!fresh) it->second = std::max(it->second, rhs);
  }
  for (auto& [coef, rhs] : dedup) p.rows.push_back({coef, rhs});
  return p;
}

inline std::vector<std::vector<int>> leaf_tuples_of(const Ensemble& e, const std::vector<std::vector<double>>& points) {
  std::vector<std::vector<int>> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(e.leaves_of(x));
  return out;
}

/// Big-M L0 model (w_m <= W z_m, sum w = W, minimise sum z) or the L1 linear
/// program (minimise sum w, no normalisation). Used for export and as a
/// cross-check of the cut-generation solver.
inline milp::MilpModel build_pruner_milp(const PrunerProblem& p) {
  milp::MilpModel m;
  const std::size_t M = p.n_trees();
  const bool l0 = p.objective == PruneObjective::L0;
  std::vector<int> w(M), z;
  for (std::size_t t = 0; t < M; ++t) w[t] = m.add_continuous("w" + std::to_string(t), 0.0, l0 ? p.w_total : milp::kInf);
  std::vector<milp::Term> obj;
  if (l0) {
    std::vector<milp::Term> norm;
    for (std::size_t t = 0; t < M; ++t) {
      z.push_back(m.add_binary("z" + std::to_string(t)));
      m.add_constraint({{w[t], 1.0}, {z[t], -p.w_total}}, milp::Relation::LessEqual, 0.0, "link" + std::to_string(t));
      norm.push_back({w[t], 1.0});
      obj.push_back({z[t], 1.0});
    }
    m.add_constraint(norm, milp::Relation::Equal, p.w_total, "norm");
  } else {
    for (std::size_t t = 0; t < M; ++t) obj.push_back({w[t], 1.0});
  }
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    std::vector<milp::Term> terms;
    for (std::size_t t = 0; t < M; ++t)
      if (p.rows[r].coef[t] != 0.0) terms.push_back({w[t], p.rows[r].coef[t]});
    m.add_constraint(terms, milp::Relation::GreaterEqual, p.rows[r].rhs, "keep" + std::to_string(r));
  }
  m.set_objective(milp::Sense::Minimize, obj);
  return m;
}

namespace detail {

using clock = std::chrono::steady_clock;

/// Linear program over the trees in `support` with lazily added rows: solve
/// on an active subset, add the most violated rows, repeat. Exact on the full
/// row set at termination.
class RowLp {
 public:
  RowLp(const PrunerProblem& p, double deadline_s, clock::time_point start)
      : p_(p), deadline_(deadline_s), start_(start) {}

  enum class Outcome { Feasible, Infeasible, TimeLimit };

  enum class Mode { Normalise, MinSum, Capped };

  // Normalise: sum w = W with w <= W. MinSum: minimise sum w. Capped:
  // sum w <= cap. Normalise and Capped maximise a bounded margin slack.
  Outcome run(const std::vector<int>& support, Mode mode, std::vector<double>& w_out, double cap = 0.0) {
    const bool normalise = mode == Mode::Normalise;
    const bool slacked = mode != Mode::MinSum;
    const std::size_t M = p_.n_trees();
    if (support.empty()) {
      if (normalise) return Outcome::Infeasible;
    }
    std::vector<double> w(M, 0.0);
    for (int t : support) w[static_cast<std::size_t>(t)] = normalise ? p_.w_total / static_cast<double>(support.size()) : 0.0;
    double slack = 0.0;
    std::vector<char> active(p_.rows.size(), 0);
    std::vector<std::size_t> act;
    const std::size_t batch = 2 * support.size() + 8;
    for (;;) {
      // Most violated rows at the current point.
      std::vector<std::pair<double, std::size_t>> viol;
      for (std::size_t r = 0; r < p_.rows.size(); ++r) {
        double lhs = 0.0;
        for (int t : support) lhs += p_.rows[r].coef[static_cast<std::size_t>(t)] * w[static_cast<std::size_t>(t)];
        // With a margin slack every row must clear half the achieved slack;
        // otherwise any shortfall counts.
        const double v = slacked ? p_.rows[r].rhs + 0.5 * slack - lhs : p_.rows[r].rhs - lhs;
        const bool short_fall = slacked ? v >= 0.0 : v > 1e-9 * (1.0 + std::abs(p_.rows[r].rhs));
        if (short_fall && !active[r]) viol.emplace_back(-v, r);
      }
      if (viol.empty()) {
        w_out = w;
        return Outcome::Feasible;
      }
      std::sort(viol.begin(), viol.end());
      for (std::size_t k = 0; k < viol.size() && k < batch; ++k) {
        active[viol[k].second] = 1;
        act.push_back(viol[k].second);
      }
      const double left = deadline_ - std::chrono::duration<double>(clock::now() - start_).count();
      if (left <= 0.0) return Outcome::TimeLimit;
      milp::MilpModel lp;
      std::vector<int> var(M, -1);
      std::vector<milp::Term> sum;
      for (int t : support) {
        var[static_cast<std::size_t>(t)] =
            lp.add_continuous("w" + std::to_string(t), 0.0, normalise ? p_.w_total : milp::kInf);
        sum.push_back({var[static_cast<std::size_t>(t)], 1.0});
      }
      if (normalise) lp.add_constraint(sum, milp::Relation::Equal, p_.w_total);
      if (mode == Mode::Capped) lp.add_constraint(sum, milp::Relation::LessEqual, cap);
      // A bounded slack pushes rows off exact ties, so floating-point
      // evaluation of the kept trees cannot flip a tied class.
      const int t_var = slacked ? lp.add_continuous("t", 0.0, std::max(p_.epsilon, 0.0)) : -1;
      for (std::size_t r : act) {
        std::vector<milp::Term> terms;
        for (int t : support)
          if (p_.rows[r].coef[static_cast<std::size_t>(t)] != 0.0)
            terms.push_back({var[static_cast<std::size_t>(t)], p_.rows[r].coef[static_cast<std::size_t>(t)]});
        if (terms.empty()) {
          if (p_.rows[r].rhs > 1e-12) return Outcome::Infeasible;
          continue;
        }
        if (t_var >= 0) terms.push_back({t_var, -1.0});
        lp.add_constraint(terms, milp::Relation::GreaterEqual, p_.rows[r].rhs);
      }
      lp.set_objective(milp::Sense::Minimize, slacked ? std::vector<milp::Term>{{t_var, -1.0}} : sum);
      milp::SolveOptions o;
      o.limits.time_limit_s = left;
      const auto s = milp::solve(lp, o);
      if (s.status == milp::SolveStatus::Infeasible) return Outcome::Infeasible;
      if (s.status != milp::SolveStatus::Optimal) return Outcome::TimeLimit;
      std::fill(w.begin(), w.end(), 0.0);
      for (int t : support) w[static_cast<std::size_t>(t)] = std::max(0.0, s.values[static_cast<std::size_t>(var[static_cast<std::size_t>(t)])]);
      if (t_var >= 0) slack = std::max(0.0, s.values[static_cast<std::size_t>(t_var)]);
    }
  }

 private:
  const PrunerProblem& p_;
  double deadline_;
  clock::time_point start_;
};

inline std::vector<int> support_of(const std::vector<double>& w) {
  std::vector<int> s;
  for (std::size_t t = 0; t < w.size(); ++t)
    if (w[t] > 0.0) s.push_back(static_cast<int>(t));
  return s;
}

}  // namespace detail

inline bool satisfies_rows(const PrunerProblem& p, std::span<const double> w, double tol = 1e-9) {
  for (const auto& r : p.rows) {
    double lhs = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) lhs += r.coef[t] * w[t];
    if (lhs < r.rhs - tol * (1.0 + std::abs(r.rhs))) return false;
  }
  return true;
}

/// Sparsest (L0) or minimum-sum (L1) weights satisfying every row.
///
/// L0 is solved exactly by cut generation over supports: a set-cover master
/// picks a smallest support meeting all cuts; a linear program checks whether
/// weights on that support exist. An infeasible support is grown to a maximal
/// infeasible one S and the cut sum_{m not in S} z_m >= 1 is added. The first
/// feasible master solution is optimal. A greedy backward elimination supplies
/// the starting incumbent; on time-out the incumbent is returned, flagged
/// non-optimal.
inline PrunerResult solve_pruner(const PrunerProblem& p, const PrunerOptions& opts) {
  const auto start = detail::clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(detail::clock::now() - start).count(); };
  const double limit = opts.limits.time_limit_s;
  const std::size_t M = p.n_trees();
  PrunerResult res;
  res.epsilon = p.epsilon;
  auto finish = [&](std::vector<double> w, bool optimal, milp::SolveStatus st) {
    // Ties forced by the support survive the LP only up to rounding; snapping
    // weights to a coarse grid makes nearly equal weights exactly equal.
    if (!preserves_classes(p, w))
      for (int bits : {40, 30, 20}) {
        const double q = p.w_total * std::ldexp(1.0, -bits);
        std::vector<double> snapped(w);
        for (auto& v : snapped) v = std::round(v / q) * q;
        if (preserves_classes(p, snapped) && satisfies_rows(p, snapped, 1e-7)) {
          w = std::move(snapped);
          break;
        }
      }
    res.weights = std::move(w);
    res.optimal = optimal;
    res.status = st;
    res.support = detail::support_of(res.weights).size();
    res.objective = p.objective == PruneObjective::L0 ? static_cast<double>(res.support)
                                                      : std::accumulate(res.weights.begin(), res.weights.end(), 0.0);
    res.wall_time_s = elapsed();
    return res;
  };
  if (limit <= 0.0) return finish(p.w0, false, milp::SolveStatus::TimeLimit);

  detail::RowLp lp(p, limit, start);
  std::vector<int> all(M);
  std::iota(all.begin(), all.end(), 0);

  if (p.objective == PruneObjective::L1) {
    std::vector<double> w;
    const auto out = lp.run(all, detail::RowLp::Mode::MinSum, w);
    if (out == detail::RowLp::Outcome::TimeLimit) return finish(p.w0, false, milp::SolveStatus::TimeLimit);
    if (out == detail::RowLp::Outcome::Infeasible)
      throw Error(Errc::InfeasibleAtEpsilon, "no non-negative weights meet the margins");
    for (auto& v : w)
      if (v < 1e-12 * p.w_total) v = 0.0;
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    // Re-solve on the optimal support with the sum capped at the optimum to
    // clear exact ties. A zero optimum (every cell ties to class 0) says
    // nothing about scale, so a normalised point is used instead.
    std::vector<double> polished;
    const auto again = sum > 0.0 ? lp.run(detail::support_of(w), detail::RowLp::Mode::Capped, polished, sum * (1.0 + 1e-9))
                                 : lp.run(all, detail::RowLp::Mode::Normalise, polished);
    if (again == detail::RowLp::Outcome::TimeLimit) return finish(p.w0, false, milp::SolveStatus::TimeLimit);
    if (again == detail::RowLp::Outcome::Feasible) w = std::move(polished);
    // The minimiser sits at the epsilon margins; without a bias the argmax is
    // scale invariant, so restore the original total weight.
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (p.bias_free && total > 0.0)
      for (auto& v : w) v *= p.w_total / total;
    finish(w, true, milp::SolveStatus::Optimal);
    res.objective = sum;
    return res;
  }

  if (opts.method == L0Method::BigM) {
    const auto model = build_pruner_milp(p);
    milp::SolveOptions o;
    o.limits = opts.limits;
    o.tol = opts.tol;
    o.initial_solution.assign(model.n_variables(), 0.0);
    for (std::size_t t = 0; t < M; ++t) {
      o.initial_solution[t] = p.w0[t];
      o.initial_solution[M + t] = p.w0[t] > 0.0 ? 1.0 : 0.0;
    }
    const auto s = milp::solve(model, o);
    if (!s.has_incumbent()) throw Error(Errc::SolverUncertified, "pruner found no incumbent");
    std::vector<double> w(M);
    for (std::size_t t = 0; t < M; ++t) w[t] = s.values[t] < 1e-12 * p.w_total ? 0.0 : s.values[t];
    // Re-solve weights on the chosen support to clear exact ties.
    std::vector<double> polished;
    if (lp.run(detail::support_of(w), detail::RowLp::Mode::Normalise, polished) == detail::RowLp::Outcome::Feasible)
      w = std::move(polished);
    return finish(w, s.status == milp::SolveStatus::Optimal, s.status);
  }

  // Greedy backward elimination from the original support.
  std::vector<double> incumbent = p.w0;
  {
    std::vector<int> keep = detail::support_of(p.w0);
    std::vector<int> order = keep;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p.w0[static_cast<std::size_t>(a)] < p.w0[static_cast<std::size_t>(b)]; });
    for (int t : order) {
      std::vector<int> trial;
      for (int k : keep)
        if (k != t) trial.push_back(k);
      std::vector<double> w;
      const auto out = lp.run(trial, detail::RowLp::Mode::Normalise, w);
      if (out == detail::RowLp::Outcome::TimeLimit) return finish(incumbent, false, milp::SolveStatus::TimeLimit);
      if (out == detail::RowLp::Outcome::Feasible) {
        keep = std::move(trial);
        incumbent = std::move(w);
      }
    }
  }
  const std::size_t upper = detail::support_of(incumbent).size();

  // Cut generation.
  milp::MilpModel master;
  std::vector<int> z(M);
  std::vector<milp::Term> obj;
  for (std::size_t t = 0; t < M; ++t) {
    z[t] = master.add_binary("z" + std::to_string(t));
    obj.push_back({z[t], 1.0});
  }
  master.set_objective(milp::Sense::Minimize, obj);
  master.add_constraint(obj, milp::Relation::GreaterEqual, 1.0, "nonempty");
  // Each strict row needs a tree that pushes it up.
  std::set<std::vector<int>> cuts;
  auto add_cut = [&](std::vector<int> members) {
    if (!cuts.insert(members).second) return;
    std::vector<milp::Term> terms;
    for (int t : members) terms.push_back({z[static_cast<std::size_t>(t)], 1.0});
    master.add_constraint(terms, milp::Relation::GreaterEqual, 1.0);
  };
  for (const auto& r : p.rows) {
    if (r.rhs <= 0.0) continue;
    std::vector<int> pos;
    for (std::size_t t = 0; t < M; ++t)
      if (r.coef[t] > 0.0) pos.push_back(static_cast<int>(t));
    add_cut(pos);
  }
  std::vector<double> inc_z(M, 0.0);
  for (int t : detail::support_of(incumbent)) inc_z[static_cast<std::size_t>(t)] = 1.0;

  for (;;) {
    ++res.master_iterations;
    const double left = limit - elapsed();
    if (left <= 0.0) return finish(incumbent, false, milp::SolveStatus::TimeLimit);
    milp::SolveOptions o;
    o.limits.time_limit_s = left;
    o.tol = opts.tol;
    o.initial_solution = inc_z;
    const auto s = milp::solve(master, o);
    if (s.status == milp::SolveStatus::Infeasible) throw Error(Errc::Inconsistent, "support cuts exclude every tree set");
    if (s.status != milp::SolveStatus::Optimal) return finish(incumbent, false, milp::SolveStatus::TimeLimit);
    std::vector<int> sup;
    for (std::size_t t = 0; t < M; ++t)
      if (s.values[static_cast<std::size_t>(z[t])] > 0.5) sup.push_back(static_cast<int>(t));
    if (sup.size() >= upper) return finish(incumbent, true, milp::SolveStatus::Optimal);
    std::vector<double> w;
    auto out = lp.run(sup, detail::RowLp::Mode::Normalise, w);
    if (out == detail::RowLp::Outcome::TimeLimit) return finish(incumbent, false, milp::SolveStatus::TimeLimit);
    if (out == detail::RowLp::Outcome::Feasible) return finish(w, true, milp::SolveStatus::Optimal);
    // Grow to a maximal infeasible support.
    std::vector<char> in(M, 0);
    for (int t : sup) in[static_cast<std::size_t>(t)] = 1;
    for (std::size_t t = 0; t < M; ++t) {
      if (in[t]) continue;
      std::vector<int> trial;
      for (std::size_t k = 0; k < M; ++k)
        if (in[k] || k == t) trial.push_back(static_cast<int>(k));
      std::vector<double> tw;
      out = lp.run(trial, detail::RowLp::Mode::Normalise, tw);
      if (out == detail::RowLp::Outcome::TimeLimit) return finish(incumbent, false, milp::SolveStatus::TimeLimit);
      if (out == detail::RowLp::Outcome::Infeasible) in[t] = 1;
    }
    std::vector<int> cut;
    for (std::size_t t = 0; t < M; ++t)
      if (!in[t]) cut.push_back(static_cast<int>(t));
    if (cut.empty()) throw Error(Errc::Inconsistent, "all trees together cannot meet the margins");
    log::debug("pruner cut of size " + std::to_string(cut.size()) + " after support " + std::to_string(sup.size()));
    add_cut(std::move(cut));
  }
}

inline nlohmann::json pruner_result_to_json(const PrunerResult& r) {
  return {{"weights", r.weights},       {"epsilon", r.epsilon},
          {"objective", r.objective},   {"optimal", r.optimal},
          {"status", std::string(milp::status_name(r.status))},
          {"support", r.support},       {"master_iterations", r.master_iterations},
          {"wall_time_s", r.wall_time_s}};
}

}  // namespace pine
