#pragma once

#include <cstddef>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/conformal.hpp"
#include "pine/dataio.hpp"
#include "pine/encoding.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/log.hpp"
#include "pine/milp.hpp"
#include "pine/plausibility.hpp"

namespace pine {

/// The plausibility constraint s(x) <= tau; an empty region means the full space.
struct Region {
  const ScoreModel* model = nullptr;
  Tau tau = Tau::infinite();

  bool active() const noexcept { return model != nullptr && !tau.is_infinite(); }
  bool contains(std::span<const double> x) const { return !active() || tau.contains(score(*model, x)); }
};

struct OracleOptions {
  double eps = 1e-6;  // strict-inequality margin
  milp::SolveLimits limits;
  milp::Tolerances tol;
  unsigned threads = 1;     // class pairs solved concurrently
  std::string dump_prefix;  // when set, each MILP is written as <prefix>_<c>_<c'>.lp/.json
};

struct Counterexample {
  std::vector<double> x;
  int original_class = 0;
  int pruned_class = 0;
  std::vector<std::size_t> cell;  // interval index per feature in the augmented index
  std::vector<int> leaves;
  double score = 0.0;             // s(x) when a region is active
  double violation = 0.0;         // F_c'(x; w) - F_c(x; w)
};

struct PairRecord {
  int original_class = 0;
  int pruned_class = 0;
  milp::SolveStatus status = milp::SolveStatus::Infeasible;
  double objective = 0.0;
  double wall_time_s = 0.0;
  std::size_t nodes = 0;
  std::size_t binaries = 0;
  bool verified = true;
};

struct OracleResult {
  bool certified = true;
  std::vector<Counterexample> found;
  std::vector<PairRecord> pairs;
  double wall_time_s = 0.0;
};

/// Thresholds of the ensemble plus those the score model needs.
inline ThresholdIndex augmented_index(const Ensemble& e, const Region& region) {
  if (region.model == nullptr) return threshold_index(e);
  return threshold_index(e, extra_thresholds(*region.model, static_cast<std::size_t>(e.n_features)));
}

/// Representative point of a cell (right endpoint of each interval).
inline std::vector<double> reconstruct_point(const ThresholdIndex& theta, std::span<const std::size_t> cell) {
  return representative(theta, cell);
}

namespace detail {

// Adds sum_m coef_m(z) >= rhs rows that pin the class of F(.; w) to `cls`.
inline void add_class_rows(milp::MilpModel& model, const Ensemble& e, std::span<const double> w,
                           const std::vector<std::vector<int>>& z, int cls, double eps, const std::string& tag) {
  for (int r = 0; r < e.n_classes; ++r) {
    if (r == cls) continue;
    std::vector<milp::Term> terms;
    for (std::size_t m = 0; m < e.size(); ++m) {
      if (w[m] == 0.0) continue;
      for (std::size_t l = 0; l < z[m].size(); ++l) {
        const auto& v = e.trees[m].leaf_scores(static_cast<int>(l));
        const double c = w[m] * (v[static_cast<std::size_t>(cls)] - v[static_cast<std::size_t>(r)]);
        if (c != 0.0) terms.push_back({z[m][l], c});
      }
    }
    const double offset = e.bias[static_cast<std::size_t>(cls)] - e.bias[static_cast<std::size_t>(r)];
    const double margin = r < cls ? eps : 0.0;
    model.add_constraint(terms, milp::Relation::GreaterEqual, margin - offset, tag + "_vs" + std::to_string(r));
  }
}

struct PairModel {
  milp::MilpModel model;
  FeatureEncoding enc;
  std::vector<std::vector<int>> z;
};

inline PairModel build_pair_model(const Ensemble& e, std::span<const double> w0, std::span<const double> w,
                                  const Region& region, const ThresholdIndex& theta, int c, int cp, double eps) {
  PairModel pm;
  pm.enc = add_feature_encoding(pm.model, theta);
  for (std::size_t m = 0; m < e.size(); ++m) pm.z.push_back(add_tree_leaves(pm.model, pm.enc, e.trees[m], "z" + std::to_string(m)));
  add_class_rows(pm.model, e, w0, pm.z, c, eps, "orig");
  add_class_rows(pm.model, e, w, pm.z, cp, eps, "pruned");
  if (region.active()) encode_score(*region.model, region.tau, pm.model, pm.enc, pm.z);
  std::vector<milp::Term> obj;
  for (std::size_t m = 0; m < e.size(); ++m) {
    if (w[m] == 0.0) continue;
    for (std::size_t l = 0; l < pm.z[m].size(); ++l) {
      const auto& v = e.trees[m].leaf_scores(static_cast<int>(l));
      const double k = w[m] * (v[static_cast<std::size_t>(cp)] - v[static_cast<std::size_t>(c)]);
      if (k != 0.0) obj.push_back({pm.z[m][l], k});
    }
  }
  pm.model.set_objective(milp::Sense::Maximize, obj,
                         e.bias[static_cast<std::size_t>(cp)] - e.bias[static_cast<std::size_t>(c)]);
  return pm;
}

}  // namespace detail

/// Build the Oracle MILP for one ordered class pair (exposed for audits and tests).
inline milp::MilpModel oracle_pair_model(const Ensemble& e, std::span<const double> w0, std::span<const double> w,
                                         const Region& region, int c, int cp, double eps = 1e-6) {
  return detail::build_pair_model(e, w0, w, region, augmented_index(e, region), c, cp, eps).model;
}

/// Search for x in the region with class c under w0 and c' != c under w, one
/// MILP per ordered pair (c, c'). All pairs infeasible gives a certificate;
/// any pair that stops on a limit leaves the call uncertified.
inline OracleResult find_counterexamples(const Ensemble& e, std::span<const double> w0, std::span<const double> w,
                                         const Region& region, const OracleOptions& opts = {}) {
  if (w0.size() != e.size() || w.size() != e.size())
    throw Error(Errc::DimensionMismatch, "weight vectors must have one entry per tree");
  const auto start = std::chrono::steady_clock::now();
  const ThresholdIndex theta = augmented_index(e, region);
  struct Job {
    int c, cp;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < e.n_classes; ++c)
    for (int cp = 0; cp < e.n_classes; ++cp)
      if (c != cp) jobs.push_back({c, cp});

  struct Outcome {
    PairRecord record;
    std::optional<Counterexample> cex;
  };
  auto run = [&](const Job& job) {
    Outcome out;
    out.record.original_class = job.c;
    out.record.pruned_class = job.cp;
    auto pm = detail::build_pair_model(e, w0, w, region, theta, job.c, job.cp, opts.eps);
    out.record.binaries = pm.model.n_binaries();
    milp::SolveOptions so;
    so.limits = opts.limits;
    so.tol = opts.tol;
    const auto sol = milp::solve(pm.model, so);
    out.record.status = sol.status;
    out.record.wall_time_s = sol.wall_time_s;
    out.record.nodes = sol.nodes;
    if (!opts.dump_prefix.empty()) {
      const std::string base = opts.dump_prefix + "_" + std::to_string(job.c) + "_" + std::to_string(job.cp);
      write_file(base + ".lp", milp::export_lp(pm.model));
      write_file(base + ".json", milp::solution_to_json(pm.model, sol).dump(2) + "\n");
    }
    if (sol.status != milp::SolveStatus::Optimal) return out;
    out.record.objective = sol.objective;
    Counterexample cx;
    cx.cell = decode_cell(pm.enc, sol.values);
    cx.x = reconstruct_point(theta, cx.cell);
    cx.leaves = e.leaves_of(cx.x);
    cx.original_class = predict_class(e, w0, cx.x);
    cx.pruned_class = predict_class(e, w, cx.x);
    const auto f = predict_scores(e, w, cx.x);
    cx.violation = f[static_cast<std::size_t>(cx.pruned_class)] - f[static_cast<std::size_t>(cx.original_class)];
    if (region.model != nullptr) cx.score = score(*region.model, cx.x);
    const bool disagrees = cx.original_class == job.c && cx.pruned_class == job.cp;
    if (!disagrees) {
      out.record.verified = false;
      log::warn("oracle point for pair (" + std::to_string(job.c) + ", " + std::to_string(job.cp) +
                ") does not reproduce the disagreement");
      return out;
    }
    if (region.active() && !region.tau.contains(cx.score))
      log::debug("oracle point lies within solver tolerance of the region boundary");
    out.cex = std::move(cx);
    return out;
  };

  std::vector<Outcome> outcomes(jobs.size());
  if (opts.threads > 1 && jobs.size() > 1) {
    for (std::size_t lo = 0; lo < jobs.size(); lo += opts.threads) {
      std::vector<std::future<Outcome>> fut;
      for (std::size_t k = lo; k < jobs.size() && k < lo + opts.threads; ++k)
        fut.push_back(std::async(std::launch::async, run, jobs[k]));
      for (std::size_t k = 0; k < fut.size(); ++k) outcomes[lo + k] = fut[k].get();
    }
  } else {
    for (std::size_t k = 0; k < jobs.size(); ++k) outcomes[k] = run(jobs[k]);
  }

  OracleResult res;
  for (auto& o : outcomes) {
    const bool settled = o.record.status == milp::SolveStatus::Infeasible ||
                         (o.record.status == milp::SolveStatus::Optimal && o.record.verified);
    res.certified = res.certified && settled;
    if (o.cex) res.found.push_back(std::move(*o.cex));
    res.pairs.push_back(o.record);
  }
  // A found counterexample settles the call; "certified" refers to emptiness.
  if (!res.found.empty()) res.certified = false;
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline nlohmann::json counterexample_to_json(const Counterexample& c) {
  return {{"x", c.x},         {"original_class", c.original_class}, {"pruned_class", c.pruned_class},
          {"cell", c.cell},   {"leaves", c.leaves},                 {"score", c.score},
          {"violation", c.violation}};
}

inline nlohmann::json pair_record_to_json(const PairRecord& r) {
  return {{"original_class", r.original_class}, {"pruned_class", r.pruned_class},
          {"status", std::string(milp::status_name(r.status))}, {"objective", r.objective},
          {"wall_time_s", r.wall_time_s}, {"nodes", r.nodes}, {"binaries", r.binaries}, {"verified", r.verified}};
}

}  // namespace pine
