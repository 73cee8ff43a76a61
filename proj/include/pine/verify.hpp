#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <json.hpp>

#include "pine/encoding.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/oracle.hpp"
#include "pine/plausibility.hpp"

namespace pine {

/// Visits every cell of a threshold index once, in lexicographic order with
/// the last feature varying fastest.
class CellIterator {
 public:
  explicit CellIterator(ThresholdIndex theta) : theta_(std::move(theta)), cell_(theta_.n_features(), 0) {}

  double total() const { return theta_.cell_count(); }
  const std::vector<std::size_t>& cell() const noexcept { return cell_; }
  std::vector<double> point() const { return representative(theta_, cell_); }
  const ThresholdIndex& index() const noexcept { return theta_; }
  bool done() const noexcept { return done_; }

  void next() {
    for (std::size_t j = cell_.size(); j-- > 0;) {
      if (++cell_[j] <= theta_[j].size()) return;
      cell_[j] = 0;
    }
    done_ = true;
  }

 private:
  ThresholdIndex theta_;
  std::vector<std::size_t> cell_;
  bool done_ = false;
};

struct DisagreementCell {
  std::vector<std::size_t> cell;
  std::vector<double> x;
  int original_class = 0;
  int pruned_class = 0;
  double score = 0.0;
};

/// Every cell whose representative is classified differently by w0 and w
/// and, when the region is active, lies inside it.
inline std::vector<DisagreementCell> check_equivalence_exhaustive(const Ensemble& e, std::span<const double> w0,
                                                                  std::span<const double> w, const Region& region = {},
                                                                  double cap = 1e7) {
  if (w0.size() != e.size() || w.size() != e.size())
    throw Error(Errc::DimensionMismatch, "weight vectors must have one entry per tree");
  CellIterator it(augmented_index(e, region));
  if (it.total() > cap)
    throw Error(Errc::TooManyCells, "cell count " + std::to_string(it.total()) + " exceeds the cap");
  std::vector<DisagreementCell> out;
  for (; !it.done(); it.next()) {
    const auto x = it.point();
    const int a = predict_class(e, w0, x);
    const int b = predict_class(e, w, x);
    if (a == b) continue;
    const double s = region.model != nullptr ? score(*region.model, x) : 0.0;
    if (region.active() && !region.tau.contains(s)) continue;
    out.push_back({it.cell(), x, a, b, s});
  }
  return out;
}

struct StateSet {
  std::vector<std::vector<std::size_t>> states;  // bin per feature, 0 for excluded features
  std::vector<double> scores;

  std::size_t size() const noexcept { return states.size(); }
};

/// Depth-first enumeration of A_tau = {s : -log p_CL(s) <= tau} over the
/// Chow-Liu tree in parent-first order. A branch is cut once its partial NLL
/// plus the smallest possible NLL of every remaining node exceeds tau.
inline StateSet enumerate_a_tau(const ChowLiuModel& m, double tau) {
  if (!std::isfinite(tau)) throw Error(Errc::InvalidArgument, "A_tau enumeration needs a finite threshold");
  const double limit = tau + 1e-12 * (1.0 + std::abs(tau));  // summation-order slack only
  const auto& order = m.order;
  const std::size_t n = order.size();
  // floor[k] = sum of per-node minimum NLL over order[k..].
  std::vector<double> floor(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const auto j = order[k];
    double lo = std::numeric_limits<double>::infinity();
    if (static_cast<int>(j) == m.root) {
      for (double v : m.root_nll) lo = std::min(lo, v);
    } else {
      for (const auto& row : m.cond_nll[j])
        for (double v : row) lo = std::min(lo, v);
    }
    floor[k] = floor[k + 1] + lo;
  }
  StateSet out;
  std::vector<std::size_t> s(m.grid.n_features(), 0);
  auto dfs = [&](auto& self, std::size_t k, double acc) -> void {
    if (acc + floor[k] > limit) return;
    if (k == n) {
      out.states.push_back(s);
      out.scores.push_back(acc);
      return;
    }
    const auto j = order[k];
    for (std::size_t b = 0; b < m.grid.bins(j); ++b) {
      s[j] = b;
      const double term = static_cast<int>(j) == m.root
                              ? m.root_nll[b]
                              : m.cond_nll[j][s[static_cast<std::size_t>(m.parent[j])]][b];
      self(self, k + 1, acc + term);
    }
    s[j] = 0;
  };
  dfs(dfs, 0, 0.0);
  return out;
}

struct StateBound {
  std::size_t count = 0;
  double bound = 0.0;
  bool holds = true;
};

/// |A_tau| against e^tau.
inline StateBound check_state_bound(const ChowLiuModel& m, double tau) {
  StateBound r;
  r.count = enumerate_a_tau(m, tau).size();
  r.bound = std::exp(tau);
  r.holds = static_cast<double>(r.count) <= r.bound * (1.0 + 1e-9);
  return r;
}

inline nlohmann::json disagreement_to_json(const DisagreementCell& d) {
  return {{"cell", d.cell}, {"x", d.x}, {"original_class", d.original_class},
          {"pruned_class", d.pruned_class}, {"score", d.score}};
}

inline nlohmann::json state_bound_to_json(const StateBound& b) {
  return {{"count", b.count}, {"bound", b.bound}, {"holds", b.holds}};
}

}  // namespace pine
