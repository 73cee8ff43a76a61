#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pine/dataio.hpp"
#include "pine/error.hpp"
#include "pine/plausibility.hpp"
#include "pine/rng.hpp"

namespace pine {

struct MoonsSpec {
  std::size_t n = 400;
  double noise = 0.2;
  std::uint64_t seed = 0;
};

/// Two interleaved half circles of radius 1: class 0 on (cos t, sin t),
/// class 1 on (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi], plus
/// Gaussian noise. Rows are shuffled with the seed.
inline Dataset gen_moons(const MoonsSpec& spec) {
  if (spec.n < 2) throw Error(Errc::InvalidArgument, "moons need at least two points");
  if (!(spec.noise >= 0.0)) throw Error(Errc::InvalidArgument, "noise must be non-negative");
  SplitMix64 rng(spec.seed);
  const std::size_t n0 = (spec.n + 1) / 2, n1 = spec.n / 2;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  auto angle = [](std::size_t i, std::size_t k) {
    return k > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(k - 1) : 0.0;
  };
  for (std::size_t i = 0; i < n0; ++i) {
    const double t = angle(i, n0);
    rows.push_back({std::cos(t), std::sin(t)});
    labels.push_back(0);
  }
  for (std::size_t i = 0; i < n1; ++i) {
    const double t = angle(i, n1);
    rows.push_back({1.0 - std::cos(t), 0.5 - std::sin(t)});
    labels.push_back(1);
  }
  if (spec.noise > 0.0)
    for (auto& r : rows)
      for (auto& v : r) v += spec.noise * rng.normal();
  std::vector<std::size_t> perm(rows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<double> values;
  std::vector<int> y;
  for (std::size_t i : perm) {
    values.insert(values.end(), rows[i].begin(), rows[i].end());
    y.push_back(labels[i]);
  }
  return Dataset(2, std::move(values), std::move(y));
}

struct TreeDistSpec {
  std::size_t p = 3;
  std::size_t B = 3;
  double concentration = 1.0;  // Dirichlet parameter of every table row
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

struct TreeDistSample {
  Dataset data;
  ChowLiuModel model;
};

namespace detail {

inline std::vector<double> dirichlet_row(SplitMix64& rng, std::size_t k, double a) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += x = std::max(rng.gamma(a), 1e-300);
  for (auto& x : v) x = std::max(x / s, 1e-12);
  s = 0.0;
  for (double x : v) s += x;
  for (auto& x : v) x /= s;
  return v;
}

inline std::size_t draw(SplitMix64& rng, const std::vector<double>& prob) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t b = 0; b < prob.size(); ++b) {
    acc += prob[b];
    if (u < acc) return b;
  }
  return prob.size() - 1;
}

}  // namespace detail

/// Random tree-factorised distribution over {0, ..., B-1}^p: feature 0 is the
/// root and feature j > 0 picks a parent uniformly among 0..j-1. Bin
/// boundaries are 0, 1, ..., B-2, so value b falls in bin b. Returns ancestral
/// samples together with the generating model.
inline TreeDistSample gen_tree_dist(const TreeDistSpec& spec) {
  if (spec.p < 1 || spec.B < 2) throw Error(Errc::InvalidArgument, "tree distribution needs p >= 1 and B >= 2");
  if (!(spec.concentration > 0.0)) throw Error(Errc::InvalidArgument, "concentration must be positive");
  SplitMix64 rng(spec.seed);
  BinGrid grid;
  grid.boundaries.assign(spec.p, {});
  for (auto& b : grid.boundaries)
    for (std::size_t k = 0; k + 1 < spec.B; ++k) b.push_back(static_cast<double>(k));
  grid.excluded.assign(spec.p, false);
  std::vector<int> parent(spec.p, -1);
  for (std::size_t j = 1; j < spec.p; ++j) parent[j] = static_cast<int>(rng.bounded(j));
  auto root_prob = detail::dirichlet_row(rng, spec.B, spec.concentration);
  std::vector<std::vector<std::vector<double>>> cond(spec.p);
  for (std::size_t j = 1; j < spec.p; ++j)
    for (std::size_t b = 0; b < spec.B; ++b) cond[j].push_back(detail::dirichlet_row(rng, spec.B, spec.concentration));
  auto model = make_chow_liu(grid, 0, parent, root_prob, cond, 1.0);
  std::vector<double> values;
  values.reserve(spec.n * spec.p);
  std::vector<std::size_t> s(spec.p);
  for (std::size_t i = 0; i < spec.n; ++i) {
    s[0] = detail::draw(rng, model.root_prob);
    for (std::size_t j = 1; j < spec.p; ++j)
      s[j] = detail::draw(rng, model.cond_prob[j][s[static_cast<std::size_t>(parent[j])]]);
    for (std::size_t j = 0; j < spec.p; ++j) values.push_back(static_cast<double>(s[j]));
  }
  return {Dataset(spec.p, std::move(values)), std::move(model)};
}

}  // namespace pine
