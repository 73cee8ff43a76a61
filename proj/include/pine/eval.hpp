#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/dataio.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/oracle.hpp"

namespace pine {

struct EvalReport {
  std::size_t n = 0;
  std::size_t matches = 0;
  std::size_t in_region = 0;
  std::size_t in_region_matches = 0;
  double fidelity = 0.0;                 // rho
  double coverage = 0.0;                 // pi_ID
  std::optional<double> fidelity_id;     // rho_ID, undefined without in-region points
  std::size_t n_trees = 0;
  std::size_t kept = 0;
  double pruning_rate = 0.0;
  double compression_ratio = 0.0;
  std::optional<double> accuracy_original;
  std::optional<double> accuracy_pruned;
};

inline std::size_t support_size(std::span<const double> w) {
  std::size_t k = 0;
  for (double v : w) k += v != 0.0 ? 1 : 0;
  return k;
}

/// Fidelity over the test set, coverage of the region and fidelity inside it.
inline EvalReport evaluate(const Ensemble& e, std::span<const double> w0, std::span<const double> w,
                           const Dataset& test, const Region& region = {}) {
  if (test.n_rows() == 0) throw Error(Errc::EmptyTestSet, "test set is empty");
  if (w0.size() != e.size() || w.size() != e.size())
    throw Error(Errc::DimensionMismatch, "weight vectors must have one entry per tree");
  EvalReport r;
  r.n = test.n_rows();
  std::size_t right0 = 0, right1 = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const auto x = test.row(i);
    const int a = predict_class(e, w0, x);
    const int b = predict_class(e, w, x);
    const bool inside = region.contains(x);
    r.matches += a == b;
    r.in_region += inside;
    r.in_region_matches += inside && a == b;
    if (test.has_labels()) {
      right0 += a == test.label(i);
      right1 += b == test.label(i);
    }
  }
  const double n = static_cast<double>(r.n);
  r.fidelity = static_cast<double>(r.matches) / n;
  r.coverage = static_cast<double>(r.in_region) / n;
  if (r.in_region > 0) r.fidelity_id = static_cast<double>(r.in_region_matches) / static_cast<double>(r.in_region);
  r.n_trees = e.size();
  r.kept = support_size(w);
  r.pruning_rate = 1.0 - static_cast<double>(r.kept) / static_cast<double>(r.n_trees);
  r.compression_ratio = r.kept > 0 ? static_cast<double>(r.n_trees) / static_cast<double>(r.kept)
                                   : std::numeric_limits<double>::infinity();
  if (test.has_labels()) {
    r.accuracy_original = static_cast<double>(right0) / n;
    r.accuracy_pruned = static_cast<double>(right1) / n;
  }
  return r;
}

/// Number of points where w and w0 disagree.
inline std::size_t mismatch_count(const Ensemble& e, std::span<const double> w0, std::span<const double> w,
                                  const Dataset& data) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) k += predict_class(e, w0, data.row(i)) != predict_class(e, w, data.row(i));
  return k;
}

/// P[Binomial(n, q) <= k].
inline double binomial_cdf(std::size_t k, std::size_t n, double q) {
  if (k >= n) return 1.0;
  if (q <= 0.0) return 1.0;
  if (q >= 1.0) return 0.0;
  const double lq = std::log(q), l1q = std::log1p(-q);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double di = static_cast<double>(i);
    s += std::exp(ln - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + di * lq +
                  static_cast<double>(n - i) * l1q);
  }
  return std::min(1.0, s);
}

/// One-sided Clopper-Pearson upper bound: the q at which P[Bin(n, q) <= k] = eta,
/// found by bisection; 1 when k = n.
inline double clopper_pearson_upper(std::size_t k, std::size_t n, double eta) {
  if (k > n) throw Error(Errc::InvalidArgument, "mismatch count exceeds trials");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(Errc::InvalidArgument, "confidence level must lie in (0, 1)");
  if (k == n) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (binomial_cdf(k, n, mid) > eta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

enum class SelectorKind { Empirical, ConfidenceBound };

inline std::string selector_name(SelectorKind k) { return k == SelectorKind::Empirical ? "empirical" : "confidence_bound"; }
inline SelectorKind parse_selector(const std::string& s) {
  if (s == "empirical") return SelectorKind::Empirical;
  if (s == "confidence_bound" || s == "cp") return SelectorKind::ConfidenceBound;
  throw Error(Errc::InvalidArgument, "unknown selector '" + s + "'");
}

struct AlphaSelection {
  double rho_star = 0.95;
  SelectorKind kind = SelectorKind::Empirical;
  double delta = 0.05;
};

struct AlphaCandidate {
  double alpha = 0.0;
  std::size_t mismatches = 0;  // K_sel(alpha)
  std::size_t n = 0;           // n_sel
};

struct AlphaChoice {
  bool fallback = true;
  double alpha = 0.0;
  std::vector<double> statistic;  // empirical risk or upper bound per candidate
  std::vector<bool> qualifies;
};

inline const std::vector<double>& default_sweep_grid() {
  static const std::vector<double> g{0.05, 0.1, 0.2, 0.4, 0.6, 0.8};
  return g;
}

inline const std::vector<double>& default_selection_grid() {
  static const std::vector<double> g{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95};
  return g;
}

/// Largest alpha whose mismatch rate (empirical) or its Clopper-Pearson upper
/// bound at delta / |grid| (confidence bound) stays within 1 - rho_star.
/// Without a qualifying alpha the unpruned ensemble is the fallback.
inline AlphaChoice select_alpha(const std::vector<AlphaCandidate>& cands, const AlphaSelection& sel) {
  if (cands.empty()) throw Error(Errc::InvalidArgument, "alpha grid is empty");
  if (!(sel.delta > 0.0 && sel.delta < 1.0)) throw Error(Errc::InvalidArgument, "delta must lie in (0, 1)");
  AlphaChoice out;
  const double eta = sel.delta / static_cast<double>(cands.size());
  for (const auto& c : cands) {
    if (c.n == 0) throw Error(Errc::InvalidArgument, "selection set is empty");
    double stat;
    bool ok;
    if (sel.kind == SelectorKind::Empirical) {
      stat = static_cast<double>(c.mismatches) / static_cast<double>(c.n);
      ok = 1.0 - stat >= sel.rho_star;
    } else {
      stat = clopper_pearson_upper(c.mismatches, c.n, eta);
      ok = stat <= 1.0 - sel.rho_star;
    }
    out.statistic.push_back(stat);
    out.qualifies.push_back(ok);
    if (ok && (out.fallback || c.alpha > out.alpha)) {
      out.fallback = false;
      out.alpha = c.alpha;
    }
  }
  return out;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json j{{"n", r.n},
                   {"matches", r.matches},
                   {"in_region", r.in_region},
                   {"in_region_matches", r.in_region_matches},
                   {"fidelity", r.fidelity},
                   {"coverage", r.coverage},
                   {"n_trees", r.n_trees},
                   {"kept", r.kept},
                   {"pruning_rate", r.pruning_rate},
                   {"compression_ratio", r.compression_ratio}};
  j["fidelity_id"] = r.fidelity_id ? nlohmann::json(*r.fidelity_id) : nlohmann::json("undefined");
  if (r.accuracy_original) j["accuracy_original"] = *r.accuracy_original;
  if (r.accuracy_pruned) j["accuracy_pruned"] = *r.accuracy_pruned;
  return j;
}

inline nlohmann::json alpha_choice_to_json(const AlphaChoice& c, const std::vector<AlphaCandidate>& cands,
                                           const AlphaSelection& sel) {
  nlohmann::json j{{"selector", selector_name(sel.kind)}, {"rho_star", sel.rho_star}, {"delta", sel.delta}};
  j["choice"] = c.fallback ? nlohmann::json("Fallback") : nlohmann::json(c.alpha);
  auto& rows = j["candidates"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cands.size(); ++i)
    rows.push_back({{"alpha", cands[i].alpha},
                    {"mismatches", cands[i].mismatches},
                    {"n", cands[i].n},
                    {"statistic", c.statistic[i]},
                    {"qualifies", static_cast<bool>(c.qualifies[i])}});
  return j;
}

}  // namespace pine
