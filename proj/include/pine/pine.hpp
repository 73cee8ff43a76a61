#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/conformal.hpp"
#include "pine/dataio.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/log.hpp"
#include "pine/oracle.hpp"
#include "pine/plausibility.hpp"
#include "pine/pruner.hpp"

namespace pine {

enum class GuaranteeScope { FullSpace, InDistribution, Uncertified };

inline std::string scope_name(GuaranteeScope s) {
  switch (s) {
    case GuaranteeScope::FullSpace: return "FullSpace";
    case GuaranteeScope::InDistribution: return "InDistribution";
    case GuaranteeScope::Uncertified: break;
  }
  return "Uncertified";
}

struct PineConfig {
  bool fipe = false;
  double alpha = 0.2;
  ScoreParams score;
  PrunerOptions pruner;
  OracleOptions oracle;
  std::size_t max_iterations = 10000;

  void validate() const {
    if (!fipe && !(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::AlphaOutOfRange, "alpha must lie in (0, 1)");
    if (!fipe && score.kind == ScoreKind::None)
      throw Error(Errc::InvalidArgument, "in-distribution pruning needs a score model");
    if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be at least 1");
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t constraint_points = 0;  // |S| as distinct cells
  std::size_t pruner_rows = 0;
  double pruner_objective = 0.0;
  std::size_t support = 0;
  bool pruner_optimal = false;
  bool oracle_certified = false;
  std::size_t counterexamples = 0;
  double epsilon = 0.0;
  double pruner_time_s = 0.0;
  double oracle_time_s = 0.0;
};

struct PruneResult {
  std::vector<double> weights;
  std::vector<double> original_weights;
  std::size_t iterations = 0;
  std::vector<IterationRecord> records;
  Tau tau;
  std::optional<CalibrationResult> calibration;
  std::optional<ScoreModel> score_model;
  bool certified = false;
  bool fipe = false;
  GuaranteeScope scope = GuaranteeScope::Uncertified;
  std::string stop_reason;
  std::vector<Counterexample> counterexamples;
  double wall_time_s = 0.0;

  std::size_t kept() const { return detail::support_of(weights).size(); }
  Region region() const { return score_model ? Region{&*score_model, tau} : Region{}; }
};

namespace detail {

inline PruneResult run_loop(const Ensemble& e, const Dataset& fit, const PineConfig& cfg, PruneResult res) {
  const auto start = std::chrono::steady_clock::now();
  res.original_weights = e.weights;
  res.fipe = cfg.fipe;
  const Region region = res.region();
  const ThresholdIndex theta = augmented_index(e, region);

  std::set<std::vector<std::size_t>> keys;
  std::vector<std::vector<int>> tuples;
  auto add_point = [&](std::span<const double> x) {
    if (!keys.insert(theta.cell_of(x)).second) return false;
    tuples.push_back(e.leaves_of(x));
    return true;
  };
  for (std::size_t i = 0; i < fit.n_rows(); ++i) add_point(fit.row(i));

  PrunerOptions popts = cfg.pruner;
  bool tightened = false;
  std::vector<double> w = e.weights;
  for (;;) {
    if (res.iterations >= cfg.max_iterations) {
      res.stop_reason = "max_iterations";
      break;
    }
    IterationRecord rec;
    rec.iteration = ++res.iterations;
    rec.constraint_points = keys.size();
    const auto prob = make_pruner_problem(e, e.weights, tuples, popts);
    const auto pr = solve_pruner(prob, popts);
    w = pr.weights;
    rec.pruner_rows = prob.rows.size();
    rec.pruner_objective = pr.objective;
    rec.support = pr.support;
    rec.pruner_optimal = pr.optimal;
    rec.epsilon = pr.epsilon;
    rec.pruner_time_s = pr.wall_time_s;

    OracleOptions oopts = cfg.oracle;
    if (!oopts.dump_prefix.empty()) oopts.dump_prefix += "_it" + std::to_string(rec.iteration);
    const auto orc = find_counterexamples(e, e.weights, w, region, oopts);
    rec.oracle_certified = orc.certified;
    rec.counterexamples = orc.found.size();
    rec.oracle_time_s = orc.wall_time_s;
    res.records.push_back(rec);

    if (orc.found.empty()) {
      res.certified = orc.certified;
      res.stop_reason = orc.certified ? "certified" : "oracle_uncertified";
      break;
    }
    std::size_t fresh = 0;
    bool repeated = false;
    for (const auto& cx : orc.found) {
      if (add_point(cx.x)) {
        ++fresh;
        res.counterexamples.push_back(cx);
      } else {
        repeated = true;
      }
    }
    if (repeated) {
      // The Pruner honoured a cell that the Oracle still reports: a margin slip.
      if (tightened) throw Error(Errc::Inconsistent, "counterexample repeated after tightening the pruning margin");
      tightened = true;
      popts.epsilon = pr.epsilon * 10.0;
      log::warn("repeated counterexample cell, pruning margin raised to " + std::to_string(popts.epsilon));
    }
    log::info("iteration " + std::to_string(rec.iteration) + ": kept " + std::to_string(pr.support) + " trees, " +
              std::to_string(fresh) + " new counterexamples");
  }
  res.weights = w;
  if (res.certified) res.scope = cfg.fipe || res.tau.is_infinite() ? GuaranteeScope::FullSpace : GuaranteeScope::InDistribution;
  else res.scope = GuaranteeScope::Uncertified;
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace detail

/// Full-space faithful pruning: the loop without a plausibility constraint.
inline PruneResult run_fipe(const Ensemble& e, const Dataset& fit, PineConfig cfg) {
  cfg.fipe = true;
  cfg.validate();
  e.validate();
  return detail::run_loop(e, fit, cfg, PruneResult{});
}

/// Prune with an in-distribution certificate: fit the score on `fit`,
/// calibrate tau(alpha) on `cal`, warm-start with `fit` and alternate
/// Pruner and Oracle until the Oracle certifies an empty set.
inline PruneResult run(const Ensemble& e, const Dataset& fit, const Dataset& cal, const PineConfig& cfg) {
  if (cfg.fipe) return run_fipe(e, fit, cfg);
  cfg.validate();
  e.validate();
  if (cal.n_rows() == 0) throw Error(Errc::EmptyCalibrationSet, "calibration set is empty");
  PruneResult res;
  res.score_model = fit_score(e, fit, cfg.score);
  std::vector<double> s(cal.n_rows());
  for (std::size_t i = 0; i < cal.n_rows(); ++i) s[i] = score(*res.score_model, cal.row(i));
  res.calibration = calibrate(s, cfg.alpha);
  res.tau = res.calibration->tau;
  return detail::run_loop(e, fit, cfg, std::move(res));
}

/// Same loop with an already fitted score model and threshold.
inline PruneResult run_with_region(const Ensemble& e, const Dataset& fit, const ScoreModel& model, const Tau& tau,
                                   const PineConfig& cfg) {
  e.validate();
  PruneResult res;
  res.score_model = model;
  res.tau = tau;
  return detail::run_loop(e, fit, cfg, std::move(res));
}

inline nlohmann::json iteration_to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"constraint_points", r.constraint_points},
          {"pruner_rows", r.pruner_rows},
          {"pruner_objective", r.pruner_objective},
          {"support", r.support},
          {"pruner_optimal", r.pruner_optimal},
          {"oracle_certified", r.oracle_certified},
          {"counterexamples", r.counterexamples},
          {"epsilon", r.epsilon},
          {"pruner_time_s", r.pruner_time_s},
          {"oracle_time_s", r.oracle_time_s}};
}

inline nlohmann::json prune_result_to_json(const PruneResult& r) {
  nlohmann::json j;
  j["mode"] = r.fipe ? "fipe" : "pine";
  j["weights"] = r.weights;
  j["original_weights"] = r.original_weights;
  j["kept_trees"] = r.kept();
  j["n_trees"] = r.weights.size();
  j["tau"] = tau_to_json(r.tau);
  if (r.calibration) j["calibration"] = calibration_to_json(*r.calibration);
  if (r.score_model) j["score_model"] = score_to_json(*r.score_model);
  j["certified"] = r.certified;
  j["guarantee_scope"] = scope_name(r.scope);
  j["stop_reason"] = r.stop_reason;
  j["iterations"] = r.iterations;
  j["wall_time_s"] = r.wall_time_s;
  auto& log = j["log"] = nlohmann::json::array();
  for (const auto& rec : r.records) log.push_back(iteration_to_json(rec));
  auto& cx = j["counterexamples"] = nlohmann::json::array();
  for (const auto& c : r.counterexamples) cx.push_back(counterexample_to_json(c));
  return j;
}

}  // namespace pine
