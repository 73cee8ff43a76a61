#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pine/dataio.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/rng.hpp"

namespace pine {

struct TrainParams {
  int rounds = 30;          // boosting rounds (one tree per round for C = 2, C trees otherwise)
  int max_depth = 2;
  double learning_rate = 0.3;
  double lambda = 1.0;      // L2 penalty on leaf values
  double min_child_hessian = 1e-6;
  double subsample = 1.0;   // row fraction per round, drawn with the seed
  std::uint64_t seed = 0;
};

namespace detail {

struct GradientRow {
  double g;
  double h;
};

// Exact greedy second-order regression tree (the XGBoost split criterion).
class GreedyTreeBuilder {
 public:
  GreedyTreeBuilder(const Dataset& data, std::span<const GradientRow> grad, const TrainParams& params)
      : data_(data), grad_(grad), params_(params) {}

  // `emit(value)` turns a Newton leaf value into the stored score vector.
  template <typename Emit>
  Tree build(std::vector<std::size_t> rows, Emit emit) {
    Tree t;
    grow(t, 0, std::move(rows), 0, emit);
    return t;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  double leaf_value(double g, double h) const { return -params_.learning_rate * g / (h + params_.lambda); }
  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  Split best_split(const std::vector<std::size_t>& rows) const {
    double g_total = 0.0, h_total = 0.0;
    for (auto r : rows) {
      g_total += grad_[r].g;
      h_total += grad_[r].h;
    }
    const double parent = score(g_total, h_total);
    Split best;
    std::vector<std::size_t> order(rows);
    for (std::size_t j = 0; j < data_.n_features(); ++j) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return data_.at(a, j) < data_.at(b, j); });
      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        gl += grad_[order[k]].g;
        hl += grad_[order[k]].h;
        const double a = data_.at(order[k], j);
        const double b = data_.at(order[k + 1], j);
        if (a == b) continue;
        const double hr = h_total - hl;
        if (hl < params_.min_child_hessian || hr < params_.min_child_hessian) continue;
        const double gain = score(gl, hl) + score(g_total - gl, hr) - parent;
        if (gain > best.gain + 1e-12) {
          double thr = a + (b - a) / 2.0;
          if (!(thr >= a && thr < b)) thr = a;
          best = {static_cast<int>(j), thr, gain};
        }
      }
    }
    return best;
  }

  template <typename Emit>
  void grow(Tree& t, int node, std::vector<std::size_t> rows, int depth, Emit& emit) {
    Split s;
    if (depth < params_.max_depth && rows.size() >= 2) s = best_split(rows);
    if (s.feature < 0) {
      double g = 0.0, h = 0.0;
      for (auto r : rows) {
        g += grad_[r].g;
        h += grad_[r].h;
      }
      t.set_leaf(node, emit(leaf_value(g, h)));
      return;
    }
    std::vector<std::size_t> left, right;
    for (auto r : rows) (data_.at(r, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(r);
    const auto [l, r] = t.split(node, s.feature, s.threshold);
    grow(t, l, std::move(left), depth + 1, emit);
    grow(t, r, std::move(right), depth + 1, emit);
  }

  const Dataset& data_;
  std::span<const GradientRow> grad_;
  const TrainParams& params_;
};

}  // namespace detail

/// Gradient boosting with exact greedy splits. Binary problems use the
/// logistic loss with one tree per round (leaf margin v stored as (-v/2, v/2));
/// C > 2 uses softmax cross-entropy with one tree per class per round. Base
/// score is 0, so the ensemble bias stays zero and all weights are 1.
inline Ensemble train_boosted(const Dataset& fit, const TrainParams& params) {
  if (!fit.has_labels()) throw Error(Errc::InvalidArgument, "training data needs labels");
  if (params.rounds < 1) throw Error(Errc::InvalidArgument, "tree count must be at least 1");
  if (params.max_depth < 1) throw Error(Errc::InvalidArgument, "max depth must be at least 1");
  if (!(params.learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must be positive");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw Error(Errc::InvalidArgument, "subsample must be in (0, 1]");
  const int C = fit.n_classes();
  {
    auto labels = fit.labels();
    std::sort(labels.begin(), labels.end());
    if (std::unique(labels.begin(), labels.end()) - labels.begin() < 2)
      throw Error(Errc::DegenerateLabels, "training labels contain a single class");
  }
  const std::size_t n = fit.n_rows();
  const std::size_t K = static_cast<std::size_t>(C);
  std::vector<double> margin(n * K, 0.0);
  std::vector<detail::GradientRow> grad(n);
  std::vector<Tree> trees;
  SplitMix64 rng(params.seed);
  detail::GreedyTreeBuilder builder(fit, grad, params);

  auto sample_rows = [&] {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (params.subsample < 1.0) {
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n)))));
      std::sort(rows.begin(), rows.end());
    }
    return rows;
  };

  for (int round = 0; round < params.rounds; ++round) {
    const auto rows = sample_rows();
    if (C == 2) {
      for (std::size_t i = 0; i < n; ++i) {
        const double z = margin[i * K + 1] - margin[i * K];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double y = fit.label(i) == 1 ? 1.0 : 0.0;
        grad[i] = {p - y, std::max(p * (1.0 - p), 1e-16)};
      }
      Tree t = builder.build(rows, [](double v) { return std::vector<double>{-v / 2.0, v / 2.0}; });
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = t.leaf_scores(t.leaf_of(fit.row(i)));
        margin[i * K] += s[0];
        margin[i * K + 1] += s[1];
      }
      trees.push_back(std::move(t));
      continue;
    }
    std::vector<double> prob(n * K);
    for (std::size_t i = 0; i < n; ++i) {
      const double mx = *std::max_element(margin.begin() + static_cast<std::ptrdiff_t>(i * K),
                                          margin.begin() + static_cast<std::ptrdiff_t>((i + 1) * K));
      double z = 0.0;
      for (std::size_t c = 0; c < K; ++c) z += prob[i * K + c] = std::exp(margin[i * K + c] - mx);
      for (std::size_t c = 0; c < K; ++c) prob[i * K + c] /= z;
    }
    std::vector<Tree> round_trees;
    for (std::size_t c = 0; c < K; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob[i * K + c];
        const double y = fit.label(i) == static_cast<int>(c) ? 1.0 : 0.0;
        grad[i] = {p - y, std::max(2.0 * p * (1.0 - p), 1e-16)};
      }
      round_trees.push_back(builder.build(rows, [&](double v) {
        std::vector<double> s(K, 0.0);
        s[c] = v;
        return s;
      }));
    }
    for (auto& t : round_trees) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = t.leaf_scores(t.leaf_of(fit.row(i)));
        for (std::size_t c = 0; c < K; ++c) margin[i * K + c] += s[c];
      }
      trees.push_back(std::move(t));
    }
  }
  return make_ensemble(std::move(trees), C, static_cast<int>(fit.n_features()));
}

}  // namespace pine
