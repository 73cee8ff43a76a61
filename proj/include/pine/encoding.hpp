#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/milp.hpp"

namespace pine {

/// Linear expression with a constant, used for derived indicators.
struct Affine {
  std::vector<milp::Term> terms;
  double constant = 0.0;
};

/// Binaries mu[j][k] meaning x_j <= theta[j][k], chained mu[j][k] <= mu[j][k+1].
struct FeatureEncoding {
  ThresholdIndex theta;
  std::vector<std::vector<int>> mu;

  /// Indicator of x_j <= theta_j[pos]; pos = -1 is the constant 0 (-inf) and
  /// pos = |theta_j| the constant 1 (+inf).
  Affine at_most(std::size_t j, long pos) const {
    if (pos < 0) return {{}, 0.0};
    if (static_cast<std::size_t>(pos) >= mu[j].size()) return {{}, 1.0};
    return {{{mu[j][static_cast<std::size_t>(pos)], 1.0}}, 0.0};
  }

  /// Indicator of x_j in (theta_j[lo], theta_j[hi]] (positions as in at_most).
  Affine between(std::size_t j, long lo, long hi) const {
    Affine a = at_most(j, hi);
    const Affine b = at_most(j, lo);
    for (const auto& t : b.terms) a.terms.push_back({t.var, -t.coef});
    a.constant -= b.constant;
    return a;
  }

  long position_of(std::size_t j, double threshold) const {
    const auto p = theta.position(j, threshold);
    if (!p) throw Error(Errc::InvalidArgument, "threshold " + std::to_string(threshold) + " of feature " +
                                                   std::to_string(j) + " is not in the encoded index");
    return static_cast<long>(*p);
  }
};

inline FeatureEncoding add_feature_encoding(milp::MilpModel& model, const ThresholdIndex& theta) {
  FeatureEncoding enc;
  enc.theta = theta;
  enc.mu.resize(theta.n_features());
  for (std::size_t j = 0; j < theta.n_features(); ++j) {
    for (std::size_t k = 0; k < theta[j].size(); ++k)
      enc.mu[j].push_back(model.add_binary("mu_" + std::to_string(j) + "_" + std::to_string(k)));
    for (std::size_t k = 0; k + 1 < enc.mu[j].size(); ++k)
      model.add_constraint({{enc.mu[j][k], 1.0}, {enc.mu[j][k + 1], -1.0}}, milp::Relation::LessEqual, 0.0,
                           "chain_" + std::to_string(j) + "_" + std::to_string(k));
  }
  return enc;
}

/// Adds one binary per leaf with sum 1 and, for every split, caps the leaves
/// of the left subtree by mu and those of the right subtree by 1 - mu. For
/// integral mu this pins the indicator of the reached leaf.
inline std::vector<int> add_tree_leaves(milp::MilpModel& model, const FeatureEncoding& enc, const Tree& tree,
                                        const std::string& prefix) {
  std::vector<int> z(tree.n_leaves());
  std::vector<milp::Term> sum;
  for (std::size_t l = 0; l < z.size(); ++l) {
    z[l] = model.add_binary(prefix + "_" + std::to_string(l));
    sum.push_back({z[l], 1.0});
  }
  model.add_constraint(sum, milp::Relation::Equal, 1.0, prefix + "_one");
  for (std::size_t id = 0; id < tree.n_nodes(); ++id) {
    const auto& n = tree.node(static_cast<int>(id));
    if (n.is_leaf()) continue;
    const auto j = static_cast<std::size_t>(n.feature);
    const auto m = enc.at_most(j, enc.position_of(j, n.threshold));
    std::vector<milp::Term> left, right;
    for (int l : tree.leaves_below(n.left)) left.push_back({z[static_cast<std::size_t>(l)], 1.0});
    for (int l : tree.leaves_below(n.right)) right.push_back({z[static_cast<std::size_t>(l)], 1.0});
    // sum_left z - mu <= 0 and sum_right z + mu <= 1.
    for (const auto& t : m.terms) {
      left.push_back({t.var, -t.coef});
      right.push_back({t.var, t.coef});
    }
    model.add_constraint(left, milp::Relation::LessEqual, m.constant, prefix + "_n" + std::to_string(id) + "_l");
    model.add_constraint(right, milp::Relation::LessEqual, 1.0 - m.constant, prefix + "_n" + std::to_string(id) + "_r");
  }
  return z;
}

/// Interval index per feature from mu values: the first k with mu = 1, else |theta_j|.
inline std::vector<std::size_t> decode_cell(const FeatureEncoding& enc, std::span<const double> values) {
  std::vector<std::size_t> cell(enc.mu.size());
  for (std::size_t j = 0; j < enc.mu.size(); ++j) {
    std::size_t k = 0;
    while (k < enc.mu[j].size() && values[static_cast<std::size_t>(enc.mu[j][k])] < 0.5) ++k;
    cell[j] = k;
  }
  return cell;
}

/// Representative of a cell: the right endpoint of (theta[i-1], theta[i]],
/// theta_max + 1 for the right-unbounded interval, 0 when theta_j is empty.
inline std::vector<double> representative(const ThresholdIndex& theta, std::span<const std::size_t> cell) {
  std::vector<double> x(cell.size());
  for (std::size_t j = 0; j < cell.size(); ++j) {
    const auto& t = theta[j];
    if (t.empty()) x[j] = 0.0;
    else if (cell[j] < t.size()) x[j] = t[cell[j]];
    else x[j] = t.back() + 1.0;
  }
  return x;
}

}  // namespace pine
