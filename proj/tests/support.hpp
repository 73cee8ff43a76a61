#pragma once

#include <cstdint>
#include <vector>

#include <pine.hpp>

namespace pine::fixtures {

/// Random tree of depth at most D over thresholds k/10, integer leaf scores.
inline Tree random_tree(SplitMix64& rng, int p, int D, int C) {
  Tree t;
  auto leaf = [&] {
    std::vector<double> v(static_cast<std::size_t>(C), 0.0);
    if (C == 2) {
      // Odd integer margins never cancel to a tie over an odd number of trees.
      const double m = 2.0 * static_cast<double>(rng.bounded(4)) - 3.0;
      v = {-m / 2.0, m / 2.0};
    } else {
      for (auto& s : v) s = static_cast<double>(rng.bounded(7)) - 3.0;
    }
    return v;
  };
  auto grow = [&](auto& self, int node, int depth) -> void {
    if (depth < D && (depth == 0 || rng.uniform01() < 0.7)) {
      const int j = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(p)));
      const double thr = static_cast<double>(1 + rng.bounded(9)) / 10.0;
      const auto [l, r] = t.split(node, j, thr);
      self(self, l, depth + 1);
      self(self, r, depth + 1);
    } else {
      t.set_leaf(node, leaf());
    }
  };
  grow(grow, 0, 0);
  return t;
}

inline Dataset uniform_points(SplitMix64& rng, std::size_t n, int p) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n * static_cast<std::size_t>(p); ++i)
    v.push_back(std::round(rng.uniform01() * 100.0) / 100.0);
  return Dataset(static_cast<std::size_t>(p), std::move(v));
}

/// Smallest gap between the winning class score and any rival over all cells.
inline double min_cell_margin(const Ensemble& e) {
  double m = std::numeric_limits<double>::infinity();
  for (CellIterator it(threshold_index(e)); !it.done(); it.next()) {
    const auto f = predict_scores(e, e.weights, it.point());
    const auto c = static_cast<std::size_t>(argmax_class(f));
    for (std::size_t r = 0; r < f.size(); ++r)
      if (r != c) m = std::min(m, f[c] - f[r]);
  }
  return m;
}

struct Instance {
  Ensemble ensemble;
  Dataset fit;
  Dataset cal;
};

/// Desk-scale instance (p <= 3, M <= 6, D <= 2) whose original margins all
/// exceed 10 eps; drawn by rejection.
inline Instance random_instance(std::uint64_t seed, int C = 0) {
  SplitMix64 rng(seed * 7919 + 17);
  for (;;) {
    const int p = 1 + static_cast<int>(rng.bounded(3));
    const int classes = C > 0 ? C : 2 + static_cast<int>(rng.bounded(2));
    int M = 1 + static_cast<int>(rng.bounded(6));
    if (classes == 2 && M % 2 == 0) M -= 1;
    const int D = 1 + static_cast<int>(rng.bounded(2));
    std::vector<Tree> trees;
    for (int m = 0; m < M; ++m) trees.push_back(random_tree(rng, p, D, classes));
    Ensemble e = make_ensemble(std::move(trees), classes, p);
    const double eps = 1e-6 * e.max_abs_leaf() * static_cast<double>(M);
    if (min_cell_margin(e) <= 10.0 * eps) continue;
    return {std::move(e), uniform_points(rng, 40, p), uniform_points(rng, 20, p)};
  }
}

}  // namespace pine::fixtures
