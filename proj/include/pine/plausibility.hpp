#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pine/conformal.hpp"
#include "pine/dataio.hpp"
#include "pine/encoding.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/milp.hpp"
#include "pine/rng.hpp"

namespace pine {

// ---------------------------------------------------------------------------
// Bin grid

/// Interior bin boundaries per feature; bin b of feature j is
/// (boundaries[b-1], boundaries[b]] with open ends at -inf and +inf.
struct BinGrid {
  std::vector<std::vector<double>> boundaries;
  std::vector<bool> excluded;

  std::size_t n_features() const noexcept { return boundaries.size(); }
  std::size_t bins(std::size_t j) const { return boundaries[j].size() + 1; }
  std::size_t bin_of(std::size_t j, double x) const {
    const auto& b = boundaries[j];
    return static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), x) - b.begin());
  }
  std::vector<std::size_t> included() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < excluded.size(); ++j)
      if (!excluded[j]) out.push_back(j);
    return out;
  }
  bool operator==(const BinGrid&) const = default;
};

/// Nearest element of a sorted list; exact midpoints go to the larger value.
inline double nearest_threshold(const std::vector<double>& sorted, double v) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  if (it == sorted.end()) return sorted.back();
  if (it == sorted.begin()) return *it;
  const double hi = *it;
  const double lo = *(it - 1);
  return (v - lo) < (hi - v) ? lo : hi;
}

/// Quantiles at b/B (order statistic ceil(b n / B)) rounded to the ensemble's
/// thresholds. Features without thresholds, or whose rounded list is empty,
/// are excluded.
inline BinGrid build_bin_grid(const Dataset& fit, int B, const ThresholdIndex& theta) {
  if (B < 2) throw Error(Errc::InvalidArgument, "bin count must be at least 2");
  if (fit.n_rows() == 0) throw Error(Errc::EmptyDataset, "cannot build bins from an empty dataset");
  if (theta.n_features() != fit.n_features())
    throw Error(Errc::DimensionMismatch, "threshold index and dataset disagree on p");
  BinGrid g;
  g.boundaries.resize(fit.n_features());
  g.excluded.assign(fit.n_features(), true);
  const std::size_t n = fit.n_rows();
  for (std::size_t j = 0; j < fit.n_features(); ++j) {
    if (theta[j].empty()) continue;
    auto col = fit.column(j);
    std::sort(col.begin(), col.end());
    auto& out = g.boundaries[j];
    for (std::size_t b = 1; b < static_cast<std::size_t>(B); ++b) {
      const std::size_t idx = (b * n + static_cast<std::size_t>(B) - 1) / static_cast<std::size_t>(B);
      out.push_back(nearest_threshold(theta[j], col[std::max<std::size_t>(idx, 1) - 1]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    g.excluded[j] = out.empty();
  }
  if (std::all_of(g.excluded.begin(), g.excluded.end(), [](bool e) { return e; }))
    throw Error(Errc::NoThresholds, "no feature has split thresholds to ground the bin grid");
  return g;
}

// ---------------------------------------------------------------------------
// Chow-Liu tree

struct ChowLiuModel {
  BinGrid grid;
  int root = -1;
  std::vector<int> parent;                 // -1 for the root and excluded features
  std::vector<std::size_t> order;          // included features, parents first
  std::vector<std::pair<int, int>> edges;  // (parent, child)
  std::vector<double> root_prob;
  std::vector<std::vector<std::vector<double>>> cond_prob;  // [child][parent bin][child bin]
  std::vector<double> root_nll;
  std::vector<std::vector<std::vector<double>>> cond_nll;
  double beta = 1.0;

  std::vector<std::size_t> discretize(std::span<const double> x) const {
    std::vector<std::size_t> s(grid.n_features(), 0);
    for (std::size_t j = 0; j < s.size(); ++j)
      if (!grid.excluded[j]) s[j] = grid.bin_of(j, x[j]);
    return s;
  }

  /// Negative log-likelihood of a discretized state (entries of excluded features ignored).
  double score_state(std::span<const std::size_t> s) const {
    double v = root_nll[s[static_cast<std::size_t>(root)]];
    for (const auto& [pa, ch] : edges)
      v += cond_nll[static_cast<std::size_t>(ch)][s[static_cast<std::size_t>(pa)]][s[static_cast<std::size_t>(ch)]];
    return v;
  }

  double score(std::span<const double> x) const {
    const auto s = discretize(x);
    return score_state(s);
  }
};

namespace detail {

inline void finish_chow_liu(ChowLiuModel& m) {
  const std::size_t p = m.grid.n_features();
  m.root_nll.resize(m.root_prob.size());
  for (std::size_t b = 0; b < m.root_prob.size(); ++b) m.root_nll[b] = -std::log(m.root_prob[b]);
  m.cond_nll.assign(p, {});
  for (std::size_t j = 0; j < p; ++j) {
    m.cond_nll[j] = m.cond_prob[j];
    for (auto& row : m.cond_nll[j])
      for (auto& v : row) v = -std::log(v);
  }
  m.order.clear();
  m.edges.clear();
  std::vector<std::size_t> frontier{static_cast<std::size_t>(m.root)};
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t a : frontier) {
      m.order.push_back(a);
      for (std::size_t j = 0; j < p; ++j)
        if (m.parent[j] == static_cast<int>(a)) {
          m.edges.emplace_back(static_cast<int>(a), static_cast<int>(j));
          next.push_back(j);
        }
    }
    frontier = std::move(next);
  }
}

inline void check_chow_liu(const ChowLiuModel& m) {
  const std::size_t p = m.grid.n_features();
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidArgument, "Chow-Liu model: " + why); };
  if (m.grid.excluded.size() != p) bad("grid flags length differs from p");
  if (m.root < 0 || static_cast<std::size_t>(m.root) >= p || m.grid.excluded[static_cast<std::size_t>(m.root)])
    bad("root must be an included feature");
  if (m.parent.size() != p || m.cond_prob.size() != p) bad("per-feature tables must have length p");
  if (m.root_prob.size() != m.grid.bins(static_cast<std::size_t>(m.root))) bad("root table size");
  auto check_row = [&](const std::vector<double>& row) {
    double s = 0.0;
    for (double v : row) {
      if (!(v > 0.0) || !std::isfinite(v)) bad("probabilities must be positive");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) bad("table row does not sum to 1");
  };
  check_row(m.root_prob);
  std::size_t reached = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (m.grid.excluded[j] || static_cast<int>(j) == m.root) {
      if (m.parent[j] != -1) bad("root and excluded features have no parent");
      continue;
    }
    const int pa = m.parent[j];
    if (pa < 0 || static_cast<std::size_t>(pa) >= p || m.grid.excluded[static_cast<std::size_t>(pa)])
      bad("included feature needs an included parent");
    if (m.cond_prob[j].size() != m.grid.bins(static_cast<std::size_t>(pa))) bad("conditional table rows");
    for (const auto& row : m.cond_prob[j]) {
      if (row.size() != m.grid.bins(j)) bad("conditional table columns");
      check_row(row);
    }
  }
  for (std::size_t j = 0; j < p; ++j) reached += m.grid.excluded[j] ? 0 : 1;
  if (m.order.size() != reached) bad("parent links do not form a tree rooted at the root");
}

}  // namespace detail

/// Assemble a model from explicit probability tables (used by the generators
/// and by JSON loading). cond_prob[j] is empty for the root and excluded features.
inline ChowLiuModel make_chow_liu(BinGrid grid, int root, std::vector<int> parent, std::vector<double> root_prob,
                                  std::vector<std::vector<std::vector<double>>> cond_prob, double beta = 1.0) {
  ChowLiuModel m;
  m.grid = std::move(grid);
  m.root = root;
  m.parent = std::move(parent);
  m.root_prob = std::move(root_prob);
  m.cond_prob = std::move(cond_prob);
  m.beta = beta;
  if (m.root >= 0 && static_cast<std::size_t>(m.root) < m.parent.size()) detail::finish_chow_liu(m);
  detail::check_chow_liu(m);
  return m;
}

/// Empirical (plug-in) mutual information between two discretized columns.
inline double mutual_information(std::span<const std::size_t> a, std::size_t ka, std::span<const std::size_t> b,
                                 std::size_t kb) {
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  std::vector<double> joint(ka * kb, 0.0), pa(ka, 0.0), pb(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    joint[a[i] * kb + b[i]] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  const double nn = static_cast<double>(n);
  double mi = 0.0;
  for (std::size_t x = 0; x < ka; ++x)
    for (std::size_t y = 0; y < kb; ++y) {
      const double c = joint[x * kb + y];
      if (c > 0.0) mi += c / nn * std::log(c * nn / (pa[x] * pb[y]));
    }
  return std::max(0.0, mi);
}

/// Maximum spanning tree over pairwise mutual information (Kruskal; equal
/// weights, compared at 1e-12 resolution, keep lexicographic edge order).
/// The root is the feature of maximum degree, ties to the lowest index.
inline ChowLiuModel fit_chow_liu(const Dataset& fit, const BinGrid& grid, double beta = 1.0) {
  if (!(beta > 0.0)) throw Error(Errc::InvalidArgument, "pseudo-count must be positive");
  const std::size_t p = grid.n_features();
  if (p != fit.n_features()) throw Error(Errc::DegenerateGrid, "grid and dataset disagree on p");
  const auto inc = grid.included();
  if (inc.empty()) throw Error(Errc::DegenerateGrid, "grid has no included feature");
  if (fit.n_rows() == 0) throw Error(Errc::DegenerateGrid, "no rows to estimate tables from");
  const std::size_t n = fit.n_rows();
  std::vector<std::vector<std::size_t>> cols(p);
  for (std::size_t j : inc) {
    cols[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) cols[j][i] = grid.bin_of(j, fit.at(i, j));
  }

  struct Edge {
    double mi;
    std::size_t a, b;
  };
  std::vector<Edge> cand;
  for (std::size_t x = 0; x < inc.size(); ++x)
    for (std::size_t y = x + 1; y < inc.size(); ++y) {
      const auto a = inc[x], b = inc[y];
      const double mi = mutual_information(cols[a], grid.bins(a), cols[b], grid.bins(b));
      cand.push_back({std::round(mi * 1e12) / 1e12, a, b});
    }
  std::stable_sort(cand.begin(), cand.end(), [](const Edge& l, const Edge& r) {
    if (l.mi != r.mi) return l.mi > r.mi;
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  std::vector<std::size_t> uf(p);
  std::iota(uf.begin(), uf.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (uf[v] != v) v = uf[v] = uf[uf[v]];
    return v;
  };
  std::vector<std::vector<std::size_t>> adj(p);
  for (const auto& e : cand) {
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    uf[ra] = rb;
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::size_t root = inc.front();
  for (std::size_t j : inc)
    if (adj[j].size() > adj[root].size()) root = j;

  std::vector<int> parent(p, -1);
  std::vector<bool> seen(p, false);
  std::vector<std::size_t> frontier{root};
  seen[root] = true;
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t a : frontier) {
      auto nb = adj[a];
      std::sort(nb.begin(), nb.end());
      for (std::size_t b : nb) {
        if (seen[b]) continue;
        seen[b] = true;
        parent[b] = static_cast<int>(a);
        next.push_back(b);
      }
    }
    frontier = std::move(next);
  }

  const std::size_t br = grid.bins(root);
  std::vector<double> root_prob(br, beta);
  for (std::size_t i = 0; i < n; ++i) root_prob[cols[root][i]] += 1.0;
  for (auto& v : root_prob) v /= static_cast<double>(n) + beta * static_cast<double>(br);
  std::vector<std::vector<std::vector<double>>> cond(p);
  for (std::size_t j : inc) {
    if (parent[j] < 0) continue;
    const auto pa = static_cast<std::size_t>(parent[j]);
    cond[j].assign(grid.bins(pa), std::vector<double>(grid.bins(j), beta));
    for (std::size_t i = 0; i < n; ++i) cond[j][cols[pa][i]][cols[j][i]] += 1.0;
    for (auto& row : cond[j]) {
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      for (auto& v : row) v /= s;
    }
  }
  return make_chow_liu(grid, static_cast<int>(root), std::move(parent), std::move(root_prob), std::move(cond), beta);
}

/// Bin indicators q[j][b] = [x_j in bin b], linked to the feature encoding.
/// Excluded features get an empty list.
inline std::vector<std::vector<int>> add_bin_indicators(milp::MilpModel& model, const FeatureEncoding& enc,
                                                        const BinGrid& grid) {
  std::vector<std::vector<int>> q(grid.n_features());
  for (std::size_t j = 0; j < grid.n_features(); ++j) {
    if (grid.excluded[j]) continue;
    std::vector<long> pos{-1};
    for (double b : grid.boundaries[j]) pos.push_back(enc.position_of(j, b));
    pos.push_back(static_cast<long>(enc.theta[j].size()));
    std::vector<milp::Term> sum;
    for (std::size_t b = 0; b + 1 < pos.size(); ++b) {
      const int v = model.add_binary("q_" + std::to_string(j) + "_" + std::to_string(b));
      q[j].push_back(v);
      sum.push_back({v, 1.0});
      // q - (mu_hi - mu_lo) = 0
      const auto ind = enc.between(j, pos[b], pos[b + 1]);
      std::vector<milp::Term> terms{{v, 1.0}};
      for (const auto& t : ind.terms) terms.push_back({t.var, -t.coef});
      model.add_constraint(terms, milp::Relation::Equal, ind.constant,
                           "qlink_" + std::to_string(j) + "_" + std::to_string(b));
    }
    model.add_constraint(sum, milp::Relation::Equal, 1.0, "qsum_" + std::to_string(j));
  }
  return q;
}

/// Adds s_CL <= tau: root-bin terms on q plus edge terms on AND variables u.
/// Nothing is added for the infinite threshold.
inline void encode_chow_liu(const ChowLiuModel& m, const Tau& tau, milp::MilpModel& model,
                            const std::vector<std::vector<int>>& q) {
  if (tau.is_infinite()) return;
  const auto r = static_cast<std::size_t>(m.root);
  std::vector<milp::Term> lhs;
  for (std::size_t b = 0; b < q[r].size(); ++b) lhs.push_back({q[r][b], m.root_nll[b]});
  for (const auto& [pa_i, ch_i] : m.edges) {
    const auto pa = static_cast<std::size_t>(pa_i), ch = static_cast<std::size_t>(ch_i);
    for (std::size_t b = 0; b < q[pa].size(); ++b)
      for (std::size_t c = 0; c < q[ch].size(); ++c) {
        const std::string tag = std::to_string(pa) + "_" + std::to_string(ch) + "_" + std::to_string(b) + "_" +
                                std::to_string(c);
        const int u = model.add_binary("u_" + tag);
        model.add_constraint({{u, 1.0}, {q[pa][b], -1.0}}, milp::Relation::LessEqual, 0.0, "and1_" + tag);
        model.add_constraint({{u, 1.0}, {q[ch][c], -1.0}}, milp::Relation::LessEqual, 0.0, "and2_" + tag);
        model.add_constraint({{u, 1.0}, {q[pa][b], -1.0}, {q[ch][c], -1.0}}, milp::Relation::GreaterEqual, -1.0,
                             "and3_" + tag);
        lhs.push_back({u, m.cond_nll[ch][b][c]});
      }
  }
  model.add_constraint(lhs, milp::Relation::LessEqual, tau.value() + tau.slack(), "score_cl");
}

// ---------------------------------------------------------------------------
// Leaf Support

struct LeafSupportModel {
  std::vector<Tree> trees;
  std::vector<std::vector<double>> prob;  // [tree][leaf]
  std::vector<std::vector<double>> cost;  // -log prob
  double beta = 1.0;

  double score(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t m = 0; m < trees.size(); ++m) s += cost[m][static_cast<std::size_t>(trees[m].leaf_of(x))];
    return s;
  }
};

/// p = (n + beta) / (sum n + beta |L|) per leaf from the fit-set visits.
inline LeafSupportModel fit_leaf_support(const Ensemble& e, const Dataset& fit, double beta = 1.0) {
  if (!(beta > 0.0)) throw Error(Errc::InvalidArgument, "pseudo-count must be positive");
  LeafSupportModel m;
  m.trees = e.trees;
  m.beta = beta;
  for (const auto& t : e.trees) {
    std::vector<double> count(t.n_leaves(), 0.0);
    for (std::size_t i = 0; i < fit.n_rows(); ++i) count[static_cast<std::size_t>(t.leaf_of(fit.row(i)))] += 1.0;
    const double denom = static_cast<double>(fit.n_rows()) + beta * static_cast<double>(t.n_leaves());
    std::vector<double> p(count.size()), a(count.size());
    for (std::size_t l = 0; l < count.size(); ++l) {
      p[l] = (count[l] + beta) / denom;
      a[l] = -std::log(p[l]);
    }
    m.prob.push_back(std::move(p));
    m.cost.push_back(std::move(a));
  }
  return m;
}

/// Single inequality sum a z <= tau over the ensemble's leaf indicators.
inline void encode_leaf_support(const LeafSupportModel& m, const Tau& tau, milp::MilpModel& model,
                                const std::vector<std::vector<int>>& leaf_vars) {
  if (tau.is_infinite()) return;
  if (leaf_vars.size() != m.trees.size()) throw Error(Errc::DimensionMismatch, "leaf-support model and ensemble differ");
  std::vector<milp::Term> lhs;
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    if (leaf_vars[t].size() != m.cost[t].size()) throw Error(Errc::DimensionMismatch, "leaf counts differ");
    for (std::size_t l = 0; l < m.cost[t].size(); ++l) lhs.push_back({leaf_vars[t][l], m.cost[t][l]});
  }
  model.add_constraint(lhs, milp::Relation::LessEqual, tau.value() + tau.slack(), "score_ls");
}

// ---------------------------------------------------------------------------
// Isolation Forest

/// Expected unsuccessful-search path length: c(n) = 2 H_{n-1} - 2 (n - 1) / n,
/// with c(0) = c(1) = 0.
inline double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  double h = 0.0;
  for (std::size_t i = 1; i < n; ++i) h += 1.0 / static_cast<double>(i);
  return 2.0 * h - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

/// Isolation trees stored as Trees whose single leaf score is the corrected
/// path length h = depth + c(n), n counted over the whole fit set.
struct IsolationForestModel {
  std::vector<Tree> trees;
  std::size_t max_samples = 256;

  double path_length(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.leaf_scores(t.leaf_of(x))[0];
    return s / static_cast<double>(trees.size());
  }
  double score(std::span<const double> x) const { return -path_length(x); }

  std::vector<std::vector<double>> thresholds(std::size_t p) const {
    std::vector<std::vector<double>> out(p);
    for (const auto& t : trees)
      for (const auto& n : t.nodes())
        if (!n.is_leaf() && n.left >= 0) out[static_cast<std::size_t>(n.feature)].push_back(n.threshold);
    for (auto& v : out) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
  }
};

/// Sets each leaf's h from its depth and the number of fit rows reaching it.
inline void assign_path_lengths(std::vector<Tree>& trees, const Dataset& fit) {
  for (auto& t : trees) {
    std::vector<std::size_t> count(t.n_leaves(), 0);
    for (std::size_t i = 0; i < fit.n_rows(); ++i) ++count[static_cast<std::size_t>(t.leaf_of(fit.row(i)))];
    for (std::size_t l = 0; l < t.n_leaves(); ++l) {
      const auto depth = t.path_to(static_cast<int>(l)).size();
      t.mutable_leaf_scores(static_cast<int>(l)) = {static_cast<double>(depth) + average_path_length(count[l])};
    }
  }
}

/// Standard isolation-tree growth on a subsample of min(max_samples, n) rows:
/// a random non-constant feature, a uniform split in its current range, until
/// one row remains or the depth reaches ceil(log2 subsample size).
inline IsolationForestModel fit_isolation_forest(const Dataset& fit, int K = 30, std::size_t max_samples = 256,
                                                 std::uint64_t seed = 0) {
  if (K < 1) throw Error(Errc::InvalidArgument, "isolation forest needs at least one tree");
  if (max_samples < 2) throw Error(Errc::TooFewSamples, "max_samples must be at least 2");
  if (fit.n_rows() < 2) throw Error(Errc::TooFewSamples, "isolation forest needs at least 2 rows");
  SplitMix64 rng(seed);
  const std::size_t psi = std::min(max_samples, fit.n_rows());
  const int cap = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));
  IsolationForestModel m;
  m.max_samples = max_samples;
  for (int k = 0; k < K; ++k) {
    std::vector<std::size_t> rows(fit.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(psi);
    Tree t;
    struct Job {
      int node;
      std::vector<std::size_t> rows;
      int depth;
    };
    std::vector<Job> stack;
    stack.push_back({0, std::move(rows), 0});
    while (!stack.empty()) {
      Job job = std::move(stack.back());
      stack.pop_back();
      std::vector<std::size_t> candidates;
      if (job.rows.size() > 1 && job.depth < cap) {
        for (std::size_t j = 0; j < fit.n_features(); ++j) {
          const auto [lo, hi] = std::minmax_element(job.rows.begin(), job.rows.end(), [&](std::size_t a, std::size_t b) {
            return fit.at(a, j) < fit.at(b, j);
          });
          if (fit.at(*lo, j) < fit.at(*hi, j)) candidates.push_back(j);
        }
      }
      if (candidates.empty()) {
        t.set_leaf(job.node, {0.0});
        continue;
      }
      const std::size_t j = candidates[rng.bounded(candidates.size())];
      double lo = fit.at(job.rows.front(), j), hi = lo;
      for (auto r : job.rows) {
        lo = std::min(lo, fit.at(r, j));
        hi = std::max(hi, fit.at(r, j));
      }
      double thr = rng.uniform(lo, hi);
      if (!(thr >= lo && thr < hi)) thr = lo;
      std::vector<std::size_t> left, right;
      for (auto r : job.rows) (fit.at(r, j) <= thr ? left : right).push_back(r);
      const auto [l, r] = t.split(job.node, static_cast<int>(j), thr);
      stack.push_back({r, std::move(right), job.depth + 1});
      stack.push_back({l, std::move(left), job.depth + 1});
    }
    m.trees.push_back(std::move(t));
  }
  assign_path_lengths(m.trees, fit);
  return m;
}

/// -(1/K) sum h g <= tau with fresh leaf indicators g per isolation tree. The
/// feature encoding must already contain the isolation-tree thresholds.
inline void encode_isolation_forest(const IsolationForestModel& m, const Tau& tau, milp::MilpModel& model,
                                    const FeatureEncoding& enc) {
  if (tau.is_infinite()) return;
  const double k = static_cast<double>(m.trees.size());
  std::vector<milp::Term> lhs;
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const auto g = add_tree_leaves(model, enc, m.trees[t], "g" + std::to_string(t));
    for (std::size_t l = 0; l < g.size(); ++l) lhs.push_back({g[l], -m.trees[t].leaf_scores(static_cast<int>(l))[0] / k});
  }
  model.add_constraint(lhs, milp::Relation::LessEqual, tau.value() + tau.slack(), "score_if");
}

// ---------------------------------------------------------------------------
// Score model dispatch

enum class ScoreKind { ChowLiu, LeafSupport, IsolationForest, None };

inline std::string score_kind_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::ChowLiu: return "chowliu";
    case ScoreKind::LeafSupport: return "leafsupport";
    case ScoreKind::IsolationForest: return "iforest";
    case ScoreKind::None: return "none";
  }
  return "none";
}

inline ScoreKind parse_score_kind(const std::string& s) {
  if (s == "chowliu") return ScoreKind::ChowLiu;
  if (s == "leafsupport") return ScoreKind::LeafSupport;
  if (s == "iforest") return ScoreKind::IsolationForest;
  if (s == "none") return ScoreKind::None;
  throw Error(Errc::InvalidArgument, "unknown score kind '" + s + "'");
}

struct ScoreParams {
  ScoreKind kind = ScoreKind::ChowLiu;
  int bins = 4;
  double beta = 1.0;
  int if_trees = 30;
  std::size_t max_samples = 256;
  std::uint64_t seed = 0;
};

using ScoreModel = std::variant<ChowLiuModel, LeafSupportModel, IsolationForestModel>;

inline ScoreKind kind_of(const ScoreModel& m) {
  switch (m.index()) {
    case 0: return ScoreKind::ChowLiu;
    case 1: return ScoreKind::LeafSupport;
    default: return ScoreKind::IsolationForest;
  }
}

inline double score(const ScoreModel& m, std::span<const double> x) {
  return std::visit([&](const auto& s) { return s.score(x); }, m);
}

/// Thresholds the score model needs in the feature encoding beyond the ensemble's.
inline std::vector<std::vector<double>> extra_thresholds(const ScoreModel& m, std::size_t p) {
  if (const auto* f = std::get_if<IsolationForestModel>(&m)) return f->thresholds(p);
  return std::vector<std::vector<double>>(p);
}

inline ScoreModel fit_score(const Ensemble& e, const Dataset& fit, const ScoreParams& params) {
  switch (params.kind) {
    case ScoreKind::ChowLiu: return fit_chow_liu(fit, build_bin_grid(fit, params.bins, threshold_index(e)), params.beta);
    case ScoreKind::LeafSupport: return fit_leaf_support(e, fit, params.beta);
    case ScoreKind::IsolationForest: return fit_isolation_forest(fit, params.if_trees, params.max_samples, params.seed);
    case ScoreKind::None: break;
  }
  throw Error(Errc::InvalidArgument, "score kind 'none' has no model");
}

/// Adds s(x) <= tau to an Oracle model (no-op for the infinite threshold).
inline void encode_score(const ScoreModel& m, const Tau& tau, milp::MilpModel& model, const FeatureEncoding& enc,
                         const std::vector<std::vector<int>>& leaf_vars) {
  if (tau.is_infinite()) return;
  if (const auto* cl = std::get_if<ChowLiuModel>(&m)) {
    const auto q = add_bin_indicators(model, enc, cl->grid);
    encode_chow_liu(*cl, tau, model, q);
  } else if (const auto* ls = std::get_if<LeafSupportModel>(&m)) {
    encode_leaf_support(*ls, tau, model, leaf_vars);
  } else {
    encode_isolation_forest(std::get<IsolationForestModel>(m), tau, model, enc);
  }
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json score_to_json(const ScoreModel& m) {
  nlohmann::json j;
  j["kind"] = score_kind_name(kind_of(m));
  if (const auto* cl = std::get_if<ChowLiuModel>(&m)) {
    j["boundaries"] = cl->grid.boundaries;
    j["excluded"] = cl->grid.excluded;
    j["root"] = cl->root;
    j["parent"] = cl->parent;
    j["root_prob"] = cl->root_prob;
    j["cond_prob"] = cl->cond_prob;
    j["beta"] = cl->beta;
  } else if (const auto* ls = std::get_if<LeafSupportModel>(&m)) {
    j["beta"] = ls->beta;
    j["prob"] = ls->prob;
    auto trees = nlohmann::json::array();
    for (const auto& t : ls->trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  } else {
    const auto& f = std::get<IsolationForestModel>(m);
    j["max_samples"] = f.max_samples;
    auto trees = nlohmann::json::array();
    for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  }
  return j;
}

inline ScoreModel score_from_json(const nlohmann::json& j) {
  try {
    const auto kind = parse_score_kind(j.at("kind").get<std::string>());
    if (kind == ScoreKind::ChowLiu) {
      BinGrid g;
      g.boundaries = j.at("boundaries").get<std::vector<std::vector<double>>>();
      g.excluded = j.at("excluded").get<std::vector<bool>>();
      return make_chow_liu(std::move(g), j.at("root").get<int>(), j.at("parent").get<std::vector<int>>(),
                           j.at("root_prob").get<std::vector<double>>(),
                           j.at("cond_prob").get<std::vector<std::vector<std::vector<double>>>>(),
                           j.at("beta").get<double>());
    }
    if (kind == ScoreKind::LeafSupport) {
      LeafSupportModel m;
      m.beta = j.at("beta").get<double>();
      m.prob = j.at("prob").get<std::vector<std::vector<double>>>();
      const auto& trees = j.at("trees");
      for (std::size_t t = 0; t < trees.size(); ++t) m.trees.push_back(tree_from_json(trees[t], "/trees/" + std::to_string(t)));
      if (m.prob.size() != m.trees.size()) throw Error(Errc::SchemaError, "/prob needs one row per tree");
      for (std::size_t t = 0; t < m.prob.size(); ++t) {
        if (m.prob[t].size() != m.trees[t].n_leaves()) throw Error(Errc::SchemaError, "/prob/" + std::to_string(t) + " length");
        std::vector<double> a;
        for (double p : m.prob[t]) a.push_back(-std::log(p));
        m.cost.push_back(std::move(a));
      }
      return m;
    }
    if (kind == ScoreKind::IsolationForest) {
      IsolationForestModel m;
      m.max_samples = j.at("max_samples").get<std::size_t>();
      const auto& trees = j.at("trees");
      for (std::size_t t = 0; t < trees.size(); ++t) m.trees.push_back(tree_from_json(trees[t], "/trees/" + std::to_string(t)));
      if (m.trees.empty()) throw Error(Errc::SchemaError, "/trees is empty");
      return m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("score model: ") + e.what());
  }
  throw Error(Errc::SchemaError, "score model kind 'none' cannot be loaded");
}

}  // namespace pine
