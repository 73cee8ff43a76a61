#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pine/error.hpp"
#include "pine/lp.hpp"

namespace pine::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Binary, Continuous };
enum class Relation { LessEqual, GreaterEqual, Equal };
enum class Sense { Minimize, Maximize };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = kInf;
  bool operator==(const Variable&) const = default;
};

struct Term {
  int var;
  double coef;
  bool operator==(const Term&) const = default;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  bool operator==(const Constraint&) const = default;
};

struct Objective {
  Sense sense = Sense::Minimize;
  std::vector<Term> terms;
  double constant = 0.0;
  bool operator==(const Objective&) const = default;
};

class MilpModel {
 public:
  int add_variable(Variable v) {
    vars_.push_back(std::move(v));
    return static_cast<int>(vars_.size()) - 1;
  }
  int add_binary(std::string name) { return add_variable({std::move(name), VarKind::Binary, 0.0, 1.0}); }
  int add_continuous(std::string name, double lower, double upper) {
    return add_variable({std::move(name), VarKind::Continuous, lower, upper});
  }

  void add_constraint(std::vector<Term> terms, Relation rel, double rhs, std::string name = {}) {
    if (name.empty()) name = "c" + std::to_string(cons_.size());
    cons_.push_back({std::move(name), std::move(terms), rel, rhs});
  }

  void set_objective(Sense sense, std::vector<Term> terms, double constant = 0.0) {
    obj_ = {sense, std::move(terms), constant};
  }

  const std::vector<Variable>& variables() const noexcept { return vars_; }
  const std::vector<Constraint>& constraints() const noexcept { return cons_; }
  const Objective& objective() const noexcept { return obj_; }
  std::size_t n_variables() const noexcept { return vars_.size(); }
  std::size_t n_constraints() const noexcept { return cons_.size(); }
  std::size_t n_binaries() const {
    return static_cast<std::size_t>(std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) { return v.kind == VarKind::Binary; }));
  }

  void validate() const {
    auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
      for (const auto& t : terms) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= vars_.size())
          throw Error(Errc::MalformedModel, where + " references undeclared variable " + std::to_string(t.var));
        if (!std::isfinite(t.coef)) throw Error(Errc::MalformedModel, where + " has a non-finite coefficient");
      }
    };
    for (const auto& v : vars_) {
      if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0 || v.lower > v.upper))
        throw Error(Errc::MalformedModel, "binary " + v.name + " must have bounds within [0, 1]");
      if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper || v.lower == kInf || v.upper == -kInf)
        throw Error(Errc::MalformedModel, "variable " + v.name + " has invalid bounds");
    }
    for (const auto& c : cons_) {
      check_terms(c.terms, "constraint " + c.name);
      if (!std::isfinite(c.rhs)) throw Error(Errc::MalformedModel, "constraint " + c.name + " has a non-finite rhs");
    }
    check_terms(obj_.terms, "objective");
    if (!std::isfinite(obj_.constant)) throw Error(Errc::MalformedModel, "objective constant is not finite");
  }

  bool operator==(const MilpModel&) const = default;

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> cons_;
  Objective obj_;
};

enum class SolveStatus { Optimal, Infeasible, TimeLimit, IterLimit };

constexpr std::string_view status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::TimeLimit: return "TimeLimit";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

struct SolveLimits {
  double time_limit_s = 120.0;
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
};

struct Tolerances {
  double feas = 1e-7;
  double integrality = 1e-6;
  double gap = 1e-9;
};

struct SolveOptions {
  SolveLimits limits;
  Tolerances tol;
  // Optional feasible start; ignored when it violates the model.
  std::vector<double> initial_solution;
};

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> values;  // empty when no incumbent exists
  double objective = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  std::size_t nodes = 0;

  bool has_incumbent() const noexcept { return !values.empty(); }
  bool certified() const noexcept { return status == SolveStatus::Optimal || status == SolveStatus::Infeasible; }
};

inline double evaluate_objective(const MilpModel& m, std::span<const double> x) {
  double z = m.objective().constant;
  for (const auto& t : m.objective().terms) z += t.coef * x[static_cast<std::size_t>(t.var)];
  return z;
}

/// Largest violation of bounds, integrality and constraints at `x`.
inline double max_violation(const MilpModel& m, std::span<const double> x, double int_tol = 0.0) {
  double worst = 0.0;
  const auto& vars = m.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    worst = std::max({worst, vars[j].lower - x[j], x[j] - vars[j].upper});
    if (vars[j].kind == VarKind::Binary) {
      const double frac = std::abs(x[j] - std::round(x[j]));
      if (frac > int_tol) worst = std::max(worst, frac);
    }
  }
  for (const auto& c : m.constraints()) {
    double lhs = 0.0;
    for (const auto& t : c.terms) lhs += t.coef * x[static_cast<std::size_t>(t.var)];
    const double d = lhs - c.rhs;
    if (c.relation == Relation::LessEqual) worst = std::max(worst, d);
    else if (c.relation == Relation::GreaterEqual) worst = std::max(worst, -d);
    else worst = std::max(worst, std::abs(d));
  }
  return worst;
}

namespace detail {

inline std::shared_ptr<const LpData> relaxation(const MilpModel& m) {
  auto d = std::make_shared<LpData>();
  const double sign = m.objective().sense == Sense::Maximize ? -1.0 : 1.0;
  d->n = static_cast<int>(m.n_variables());
  d->cost.assign(m.n_variables(), 0.0);
  for (const auto& t : m.objective().terms) d->cost[static_cast<std::size_t>(t.var)] += sign * t.coef;
  for (const auto& v : m.variables()) {
    d->lb.push_back(v.lower);
    d->ub.push_back(v.upper);
  }
  for (const auto& c : m.constraints()) {
    std::map<int, double> merged;
    for (const auto& t : c.terms) merged[t.var] += t.coef;
    SparseRow row;
    for (const auto& [j, a] : merged) {
      if (a == 0.0) continue;
      row.idx.push_back(j);
      row.val.push_back(a);
    }
    d->rows.push_back(std::move(row));
    d->rhs.push_back(c.rhs);
    switch (c.relation) {
      case Relation::LessEqual:
        d->slack_lo.push_back(0.0);
        d->slack_hi.push_back(kInf);
        break;
      case Relation::GreaterEqual:
        d->slack_lo.push_back(-kInf);
        d->slack_hi.push_back(0.0);
        break;
      case Relation::Equal:
        d->slack_lo.push_back(0.0);
        d->slack_hi.push_back(0.0);
        break;
    }
  }
  return d;
}

}  // namespace detail

/// Exact branch-and-bound over the binary variables with LP relaxation bounds.
///
/// Node selection is best-first on the relaxation bound (ties go to the most
/// recently created node). After branching, the search plunges into the child
/// nearer the LP value, re-optimising the parent tableau with the dual simplex;
/// the sibling is queued. Branching picks the most fractional binary, ties to
/// the lowest index. Optimal and Infeasible are certificates: the tree was
/// exhausted. TimeLimit / IterLimit return the incumbent, if any.
inline MilpSolution solve(const MilpModel& model, const SolveOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  model.validate();

  MilpSolution sol;
  const double sign = model.objective().sense == Sense::Maximize ? -1.0 : 1.0;
  const auto& vars = model.variables();
  std::vector<int> binaries;
  for (std::size_t j = 0; j < vars.size(); ++j)
    if (vars[j].kind == VarKind::Binary) binaries.push_back(static_cast<int>(j));

  // Objective known to be integral on integer points: integer coefficients on
  // binaries only, so bounds can be rounded up.
  bool integral_objective = std::abs(model.objective().constant - std::round(model.objective().constant)) == 0.0;
  for (const auto& t : model.objective().terms)
    if (vars[static_cast<std::size_t>(t.var)].kind != VarKind::Binary || t.coef != std::round(t.coef))
      integral_objective = integral_objective && t.coef == 0.0;

  double incumbent = kInf;  // internal (minimisation) objective, without constant
  std::vector<double> best;
  auto offer = [&](const std::vector<double>& x) {
    if (max_violation(model, x, 0.0) > opts.tol.feas) return false;
    const double z = sign * (evaluate_objective(model, x) - model.objective().constant);
    if (z < incumbent) {
      incumbent = z;
      best = x;
    }
    return true;
  };
  if (opts.initial_solution.size() == vars.size()) {
    auto x = opts.initial_solution;
    for (int j : binaries) x[static_cast<std::size_t>(j)] = std::round(x[static_cast<std::size_t>(j)]);
    offer(x);
  }

  auto prunable = [&](double bound) {
    if (!std::isfinite(incumbent)) return false;
    if (integral_objective) return std::ceil(bound - 1e-6) >= incumbent - 0.5;
    return bound >= incumbent - opts.tol.gap;
  };

  auto finish = [&](SolveStatus st, double open_bound) {
    sol.status = st;
    sol.wall_time_s = elapsed();
    if (!best.empty()) {
      sol.values = best;
      sol.objective = evaluate_objective(model, best);
    }
    const double cst = model.objective().constant;
    if (st == SolveStatus::Optimal) {
      sol.bound = sol.objective;
      sol.gap = 0.0;
    } else if (st == SolveStatus::Infeasible) {
      sol.bound = sign * kInf;
    } else {
      const double b = std::min(open_bound, incumbent);
      sol.bound = std::isfinite(b) ? sign * b + cst : sign * -kInf;
      sol.gap = best.empty() ? kInf : std::abs(incumbent - std::min(open_bound, incumbent));
    }
    return sol;
  };

  if (elapsed() >= opts.limits.time_limit_s) return finish(SolveStatus::TimeLimit, -kInf);

  const auto data = detail::relaxation(model);
  milp::detail::DenseSimplex root(data);
  const auto root_status = root.solve();
  sol.nodes = 1;
  if (root_status == milp::detail::LpStatus::Unbounded) throw Error(Errc::Unbounded, "LP relaxation is unbounded");
  if (root_status == milp::detail::LpStatus::Infeasible) return finish(SolveStatus::Infeasible, kInf);
  if (root_status == milp::detail::LpStatus::IterLimit) return finish(SolveStatus::IterLimit, -kInf);

  struct Pending {
    double bound;
    std::uint64_t seq;
    std::vector<std::pair<int, std::int8_t>> fixes;
  };
  struct Worse {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.seq < b.seq;
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, Worse> open;
  std::uint64_t seq = 0;

  milp::detail::DenseSimplex lp = root;
  std::vector<std::pair<int, std::int8_t>> fixes;
  milp::detail::LpStatus status = root_status;
  bool have_node = true;
  double node_bound = -kInf;

  for (;;) {
    if (!have_node) {
      while (!open.empty() && prunable(open.top().bound)) open.pop();
      if (open.empty()) break;
      Pending next = open.top();
      open.pop();
      lp = root;
      for (auto [j, v] : next.fixes) lp.tighten(j, v, v);
      fixes = std::move(next.fixes);
      node_bound = next.bound;
      status = lp.resolve();
      ++sol.nodes;
      have_node = true;
    }
    if (elapsed() >= opts.limits.time_limit_s) {
      open.push({node_bound, seq++, fixes});
      return finish(SolveStatus::TimeLimit, open.top().bound);
    }
    if (sol.nodes > opts.limits.node_limit) {
      open.push({node_bound, seq++, fixes});
      return finish(SolveStatus::IterLimit, open.top().bound);
    }
    have_node = false;
    if (status == milp::detail::LpStatus::Infeasible) continue;
    if (status != milp::detail::LpStatus::Optimal) {
      // Numerical trouble at this node: rebuild from scratch once.
      status = lp.solve();
      if (status == milp::detail::LpStatus::Infeasible) continue;
      if (status != milp::detail::LpStatus::Optimal) throw Error(Errc::Unbounded, "LP relaxation failed at a branch node");
    }
    const double bound = lp.objective();
    if (prunable(bound)) continue;
    auto x = lp.primal_values();

    int branch = -1;
    double best_frac = -1.0;
    int fallback = -1;
    double fallback_frac = 0.0;
    for (int j : binaries) {
      const double v = x[static_cast<std::size_t>(j)];
      const double frac = std::abs(v - std::round(v));
      if (frac > opts.tol.integrality) {
        const double score = 0.5 - std::abs(v - std::floor(v) - 0.5);
        if (score > best_frac + 1e-12) {
          best_frac = score;
          branch = j;
        }
      } else if (frac > fallback_frac) {
        fallback_frac = frac;
        fallback = j;
      }
    }
    if (branch < 0) {
      for (int j : binaries) x[static_cast<std::size_t>(j)] = std::round(x[static_cast<std::size_t>(j)]);
      if (offer(x)) continue;
      // Rounding broke feasibility: fix every binary and re-solve the continuous part.
      milp::detail::DenseSimplex fixed = root;
      for (int j : binaries) fixed.tighten(j, x[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
      if (fixed.resolve() == milp::detail::LpStatus::Optimal) {
        auto y = fixed.primal_values();
        for (int j : binaries) y[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)];
        if (offer(y)) continue;
      }
      if (fallback < 0) continue;
      branch = fallback;
    }
    const double v = x[static_cast<std::size_t>(branch)];
    const std::int8_t dive = v >= 0.5 ? 1 : 0;
    auto other = fixes;
    other.emplace_back(branch, static_cast<std::int8_t>(1 - dive));
    open.push({bound, seq++, std::move(other)});
    fixes.emplace_back(branch, dive);
    lp.tighten(branch, dive, dive);
    status = lp.resolve();
    node_bound = bound;
    ++sol.nodes;
    have_node = true;
  }
  return finish(best.empty() ? SolveStatus::Infeasible : SolveStatus::Optimal, kInf);
}

inline nlohmann::json solution_to_json(const MilpModel& model, const MilpSolution& s) {
  nlohmann::json j;
  j["status"] = std::string(status_name(s.status));
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
  };
  j["objective"] = num(s.objective);
  j["bound"] = num(s.bound);
  j["gap"] = num(s.gap);
  j["wall_time_s"] = s.wall_time_s;
  j["nodes"] = s.nodes;
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t i = 0; i < s.values.size(); ++i) values[model.variables()[i].name] = s.values[i];
  j["values"] = std::move(values);
  return j;
}

// ---------------------------------------------------------------------------
// LP file format (CPLEX dialect). Every variable is listed in Bounds in
// declaration order, which is what makes the round trip deterministic.

namespace detail {

inline std::string lp_number(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline bool lp_name_ok(std::string_view s) {
  if (s.empty() || s.size() > 255) return false;
  const char c0 = s.front();
  if (std::isdigit(static_cast<unsigned char>(c0)) || c0 == '.' || c0 == 'e' || c0 == 'E') return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '[' || c == ']' || c == '#'))
      return false;
  return true;
}

inline std::vector<std::string> lp_names(const MilpModel& m) {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> seen;
  for (std::size_t j = 0; j < m.n_variables(); ++j) {
    std::string n = m.variables()[j].name;
    if (!lp_name_ok(n) || seen.count(n)) n = "v" + std::to_string(j);
    while (seen.count(n)) n += "_";
    seen[n] = 1;
    names.push_back(n);
  }
  return names;
}

inline std::string lp_expr(const std::vector<Term>& terms, const std::vector<std::string>& names) {
  std::string out;
  for (const auto& t : terms) {
    out += t.coef < 0 || std::signbit(t.coef) ? " - " : " + ";
    out += lp_number(std::abs(t.coef));
    out += ' ';
    out += names[static_cast<std::size_t>(t.var)];
  }
  return out;
}

}  // namespace detail

inline std::string export_lp(const MilpModel& m) {
  const auto names = detail::lp_names(m);
  std::ostringstream out;
  out << "\\ pine MILP export\n";
  out << (m.objective().sense == Sense::Maximize ? "Maximize\n" : "Minimize\n");
  if (!m.objective().terms.empty() || m.objective().constant != 0.0) {
    out << " obj:" << detail::lp_expr(m.objective().terms, names);
    if (m.objective().constant != 0.0 || m.objective().terms.empty())
      out << (m.objective().constant < 0 ? " - " : " + ") << detail::lp_number(std::abs(m.objective().constant));
    out << '\n';
  }
  out << "Subject To\n";
  for (const auto& c : m.constraints()) {
    const std::string cname = detail::lp_name_ok(c.name) ? c.name : "c";
    out << ' ' << cname << ':' << (c.terms.empty() ? " 0" : detail::lp_expr(c.terms, names));
    out << (c.relation == Relation::LessEqual ? " <= " : c.relation == Relation::GreaterEqual ? " >= " : " = ")
        << detail::lp_number(c.rhs) << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < m.n_variables(); ++j) {
    const auto& v = m.variables()[j];
    if (v.lower == -kInf && v.upper == kInf) out << ' ' << names[j] << " free\n";
    else out << ' ' << detail::lp_number(v.lower) << " <= " << names[j] << " <= " << detail::lp_number(v.upper) << '\n';
  }
  bool any_bin = false;
  for (std::size_t j = 0; j < m.n_variables(); ++j) {
    if (m.variables()[j].kind != VarKind::Binary) continue;
    if (!any_bin) out << "Binaries\n";
    any_bin = true;
    out << ' ' << names[j] << '\n';
  }
  out << "End\n";
  return out.str();
}

/// Reader for the dialect written by export_lp (one statement per line).
inline MilpModel parse_lp(std::string_view text) {
  enum class Section { None, Objective, Constraints, Bounds, Binaries, Done };
  Section sec = Section::None;
  Sense sense = Sense::Minimize;
  struct RawExpr {
    std::vector<std::pair<std::string, double>> terms;
    double constant = 0.0;
  };
  RawExpr objective;
  struct RawCons {
    std::string name;
    RawExpr expr;
    Relation rel;
    double rhs;
  };
  std::vector<RawCons> cons;
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<double, double>> bounds;
  std::unordered_map<std::string, bool> binary;

  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  auto parse_num = [](const std::string& tok) -> std::optional<double> {
    if (tok == "+inf" || tok == "inf" || tok == "+infinity" || tok == "infinity") return kInf;
    if (tok == "-inf" || tok == "-infinity") return -kInf;
    double v = 0.0;
    const char* b = tok.data();
    if (!tok.empty() && tok[0] == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
  };
  auto note = [&](const std::string& name) {
    if (!bounds.count(name)) {
      bounds[name] = {0.0, kInf};
      order.push_back(name);
    }
  };
  auto parse_expr = [&](const std::vector<std::string>& toks, std::size_t from, std::size_t to) {
    RawExpr e;
    double s = 1.0;
    bool has_coef = false;
    double coef = 1.0;
    for (std::size_t i = from; i < to; ++i) {
      const auto& t = toks[i];
      if (t == "+" || t == "-") {
        if (has_coef) e.constant += s * coef;
        has_coef = false;
        s = t == "-" ? -1.0 : 1.0;
      } else if (auto v = parse_num(t)) {
        if (has_coef) e.constant += s * coef;
        has_coef = true;
        coef = *v;
      } else {
        e.terms.emplace_back(t, s * (has_coef ? coef : 1.0));
        has_coef = false;
        s = 1.0;
      }
    }
    if (has_coef) e.constant += s * coef;
    return e;
  };

  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto c = line.find('\\'); c != std::string::npos) line.erase(c);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    const std::string head = lower(toks[0]);
    if (head == "minimize" || head == "minimise" || head == "min") { sec = Section::Objective; sense = Sense::Minimize; continue; }
    if (head == "maximize" || head == "maximise" || head == "max") { sec = Section::Objective; sense = Sense::Maximize; continue; }
    if (head == "subject" || head == "st" || head == "s.t.") { sec = Section::Constraints; continue; }
    if (head == "bounds") { sec = Section::Bounds; continue; }
    if (head == "binaries" || head == "binary" || head == "bin") { sec = Section::Binaries; continue; }
    if (head == "end") { sec = Section::Done; continue; }
    std::size_t from = 0;
    std::string label;
    if (toks[0].back() == ':') {
      label = toks[0].substr(0, toks[0].size() - 1);
      from = 1;
    }
    switch (sec) {
      case Section::Objective: {
        objective = parse_expr(toks, from, toks.size());
        for (auto& [n, c] : objective.terms) note(n);
        break;
      }
      case Section::Constraints: {
        std::size_t r = from;
        while (r < toks.size() && toks[r] != "<=" && toks[r] != ">=" && toks[r] != "=" && toks[r] != "=<" && toks[r] != "=>") ++r;
        if (r + 1 >= toks.size()) throw Error(Errc::ParseError, "constraint without relation: " + line);
        RawCons c;
        c.name = label;
        c.expr = parse_expr(toks, from, r);
        c.rel = (toks[r] == "<=" || toks[r] == "=<") ? Relation::LessEqual : (toks[r] == "=") ? Relation::Equal : Relation::GreaterEqual;
        const auto rhs = parse_num(toks[r + 1]);
        if (!rhs) throw Error(Errc::ParseError, "bad right-hand side: " + line);
        c.rhs = *rhs - c.expr.constant;
        for (auto& [n, k] : c.expr.terms) note(n);
        cons.push_back(std::move(c));
        break;
      }
      case Section::Bounds: {
        if (toks.size() == 2 && lower(toks[1]) == "free") {
          note(toks[0]);
          bounds[toks[0]] = {-kInf, kInf};
        } else if (toks.size() == 5) {
          note(toks[2]);
          bounds[toks[2]] = {parse_num(toks[0]).value(), parse_num(toks[4]).value()};
        } else if (toks.size() == 3) {
          note(toks[0]);
          const double v = parse_num(toks[2]).value();
          if (toks[1] == ">=") bounds[toks[0]].first = v;
          else if (toks[1] == "<=") bounds[toks[0]].second = v;
          else bounds[toks[0]] = {v, v};
        } else {
          throw Error(Errc::ParseError, "bad bound: " + line);
        }
        break;
      }
      case Section::Binaries:
        for (std::size_t i = from; i < toks.size(); ++i) {
          note(toks[i]);
          binary[toks[i]] = true;
        }
        break;
      default:
        throw Error(Errc::ParseError, "statement outside a section: " + line);
    }
  }
  // Bounds lines fix the declaration order; other names follow first use.
  std::vector<std::string> declared;
  {
    std::istringstream again{std::string(text)};
    bool in_bounds = false;
    std::unordered_map<std::string, int> seen;
    while (std::getline(again, line)) {
      std::istringstream ls(line);
      std::vector<std::string> toks;
      for (std::string t; ls >> t;) toks.push_back(t);
      if (toks.empty()) continue;
      const std::string head = lower(toks[0]);
      if (head == "bounds") { in_bounds = true; continue; }
      if (head == "binaries" || head == "binary" || head == "end" || head == "generals") { in_bounds = false; continue; }
      if (!in_bounds) continue;
      const std::string& name = toks.size() == 5 ? toks[2] : toks[0];
      if (!seen.count(name)) {
        seen[name] = 1;
        declared.push_back(name);
      }
    }
    for (const auto& n : order)
      if (!seen.count(n)) {
        seen[n] = 1;
        declared.push_back(n);
      }
  }
  MilpModel m;
  std::unordered_map<std::string, int> index;
  for (const auto& n : declared) {
    const auto [lo, hi] = bounds[n];
    const bool bin = binary.count(n) > 0;
    index[n] = m.add_variable({n, bin ? VarKind::Binary : VarKind::Continuous, bin ? std::max(lo, 0.0) : lo,
                               bin ? std::min(hi, 1.0) : hi});
  }
  auto terms_of = [&](const RawExpr& e) {
    std::vector<Term> t;
    for (const auto& [n, c] : e.terms) t.push_back({index.at(n), c});
    return t;
  };
  for (const auto& c : cons) m.add_constraint(terms_of(c.expr), c.rel, c.rhs, c.name);
  m.set_objective(sense, terms_of(objective), objective.constant);
  return m;
}

}  // namespace pine::milp
