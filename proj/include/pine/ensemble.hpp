#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/dataio.hpp"
#include "pine/error.hpp"

namespace pine {

/// Axis-aligned binary tree. Routing: x[feature] <= threshold goes left.
/// Node 0 is the root; leaves are numbered 0..n_leaves()-1 in creation order.
class Tree {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int parent = -1;
    int leaf = -1;  // leaf id when this node is a leaf
    bool is_leaf() const noexcept { return leaf >= 0; }
  };

  struct PathStep {
    int feature;
    double threshold;
    bool goes_left;
  };

  Tree() { nodes_.push_back(Node{}); }

  static Tree single_leaf(std::vector<double> scores) {
    Tree t;
    t.set_leaf(0, std::move(scores));
    return t;
  }

  static Tree stump(int feature, double threshold, std::vector<double> left, std::vector<double> right) {
    Tree t;
    const auto [l, r] = t.split(0, feature, threshold);
    t.set_leaf(l, std::move(left));
    t.set_leaf(r, std::move(right));
    return t;
  }

  /// Turn an open node into a split; returns {left, right} child node ids.
  std::pair<int, int> split(int node, int feature, double threshold) {
    check_open(node);
    if (feature < 0) throw Error(Errc::InvalidArgument, "negative feature index");
    if (!std::isfinite(threshold)) throw Error(Errc::InvalidArgument, "non-finite threshold");
    const int l = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{.parent = node});
    nodes_.push_back(Node{.parent = node});
    auto& n = nodes_[static_cast<std::size_t>(node)];
    n.feature = feature;
    n.threshold = threshold;
    n.left = l;
    n.right = l + 1;
    return {l, l + 1};
  }

  int set_leaf(int node, std::vector<double> scores) {
    check_open(node);
    auto& n = nodes_[static_cast<std::size_t>(node)];
    n.leaf = static_cast<int>(leaves_.size());
    leaves_.push_back(std::move(scores));
    leaf_nodes_.push_back(node);
    return n.leaf;
  }

  int leaf_of(std::span<const double> x) const {
    int at = 0;
    for (;;) {
      const auto& n = nodes_[static_cast<std::size_t>(at)];
      if (n.is_leaf()) return n.leaf;
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
  }

  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  std::size_t n_leaves() const noexcept { return leaves_.size(); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& leaf_scores(int leaf) const { return leaves_.at(static_cast<std::size_t>(leaf)); }
  std::vector<double>& mutable_leaf_scores(int leaf) { return leaves_.at(static_cast<std::size_t>(leaf)); }
  int leaf_node(int leaf) const { return leaf_nodes_.at(static_cast<std::size_t>(leaf)); }

  /// Root-to-leaf split conditions.
  std::vector<PathStep> path_to(int leaf) const {
    std::vector<PathStep> path;
    int child = leaf_node(leaf);
    for (int at = nodes_[static_cast<std::size_t>(child)].parent; at >= 0;
         child = at, at = nodes_[static_cast<std::size_t>(at)].parent) {
      const auto& n = nodes_[static_cast<std::size_t>(at)];
      path.push_back({n.feature, n.threshold, n.left == child});
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Leaves in the subtree rooted at `node`.
  std::vector<int> leaves_below(int node) const {
    std::vector<int> out;
    std::vector<int> stack{node};
    while (!stack.empty()) {
      const int at = stack.back();
      stack.pop_back();
      const auto& n = nodes_[static_cast<std::size_t>(at)];
      if (n.is_leaf()) {
        out.push_back(n.leaf);
      } else {
        stack.push_back(n.right);
        stack.push_back(n.left);
      }
    }
    return out;
  }

  int depth() const { return depth_of(0); }

  bool complete() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf() || n.left >= 0; });
  }

  bool operator==(const Tree& other) const {
    return structurally_equal(0, other, 0);
  }

 private:
  void check_open(int node) const {
    if (node < 0 || static_cast<std::size_t>(node) >= nodes_.size())
      throw Error(Errc::InvalidArgument, "node id out of range");
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    if (n.is_leaf() || n.left >= 0) throw Error(Errc::InvalidArgument, "node already defined");
  }

  int depth_of(int at) const {
    const auto& n = nodes_[static_cast<std::size_t>(at)];
    if (n.is_leaf() || n.left < 0) return 0;
    return 1 + std::max(depth_of(n.left), depth_of(n.right));
  }

  bool structurally_equal(int a, const Tree& other, int b) const {
    const auto& x = nodes_[static_cast<std::size_t>(a)];
    const auto& y = other.nodes_[static_cast<std::size_t>(b)];
    if (x.is_leaf() != y.is_leaf()) return false;
    if (x.is_leaf()) return leaves_[static_cast<std::size_t>(x.leaf)] == other.leaves_[static_cast<std::size_t>(y.leaf)];
    return x.feature == y.feature && x.threshold == y.threshold && structurally_equal(x.left, other, y.left) &&
           structurally_equal(x.right, other, y.right);
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> leaves_;
  std::vector<int> leaf_nodes_;
};

/// Weighted tree ensemble: F(x; w) = bias + sum_m w_m * v_{m, leaf_m(x)}.
/// `bias` is a fixed, unprunable offset (an always-active single-leaf tree of
/// weight 1); it is all zeros unless an imported model carries a base margin.
struct Ensemble {
  std::vector<Tree> trees;
  std::vector<double> weights;
  std::vector<double> bias;
  int n_classes = 2;
  int n_features = 1;

  std::size_t size() const noexcept { return trees.size(); }

  void validate() const {
    if (trees.empty()) throw Error(Errc::InvalidArgument, "ensemble needs at least one tree");
    if (n_classes < 2) throw Error(Errc::InvalidArgument, "ensemble needs at least two classes");
    if (n_features < 1) throw Error(Errc::InvalidArgument, "ensemble needs at least one feature");
    if (weights.size() != trees.size()) throw Error(Errc::DimensionMismatch, "one weight per tree required");
    if (bias.size() != static_cast<std::size_t>(n_classes)) throw Error(Errc::DimensionMismatch, "bias length must be C");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidArgument, "weights must be finite and non-negative");
    for (const auto& t : trees) {
      if (!t.complete()) throw Error(Errc::InvalidArgument, "tree has an undefined node");
      for (const auto& n : t.nodes())
        if (!n.is_leaf() && n.feature >= n_features) throw Error(Errc::InvalidArgument, "split feature out of range");
      for (std::size_t l = 0; l < t.n_leaves(); ++l)
        if (t.leaf_scores(static_cast<int>(l)).size() != static_cast<std::size_t>(n_classes))
          throw Error(Errc::DimensionMismatch, "leaf score vector length must be C");
    }
  }

  double max_abs_leaf() const {
    double m = 0.0;
    for (const auto& t : trees)
      for (std::size_t l = 0; l < t.n_leaves(); ++l)
        for (double v : t.leaf_scores(static_cast<int>(l))) m = std::max(m, std::abs(v));
    return m;
  }

  std::vector<int> leaves_of(std::span<const double> x) const {
    std::vector<int> out(trees.size());
    for (std::size_t m = 0; m < trees.size(); ++m) out[m] = trees[m].leaf_of(x);
    return out;
  }
};

inline Ensemble make_ensemble(std::vector<Tree> trees, int n_classes, int n_features) {
  Ensemble e;
  e.weights.assign(trees.size(), 1.0);
  e.trees = std::move(trees);
  e.bias.assign(static_cast<std::size_t>(n_classes), 0.0);
  e.n_classes = n_classes;
  e.n_features = n_features;
  e.validate();
  return e;
}

inline int leaf_of(const Tree& tree, std::span<const double> x) { return tree.leaf_of(x); }

/// Scores from per-tree leaf ids; the shared kernel of every evaluator.
inline std::vector<double> scores_from_leaves(const Ensemble& e, std::span<const double> w, std::span<const int> leaves) {
  std::vector<double> f(e.bias);
  for (std::size_t m = 0; m < e.trees.size(); ++m) {
    if (w[m] == 0.0) continue;
    const auto& v = e.trees[m].leaf_scores(leaves[m]);
    for (std::size_t c = 0; c < f.size(); ++c) f[c] += w[m] * v[c];
  }
  return f;
}

inline std::vector<double> predict_scores(const Ensemble& e, std::span<const double> w, std::span<const double> x) {
  if (w.size() != e.trees.size()) throw Error(Errc::DimensionMismatch, "weight vector length differs from tree count");
  if (x.size() != static_cast<std::size_t>(e.n_features))
    throw Error(Errc::DimensionMismatch, "feature vector length differs from p");
  const auto leaves = e.leaves_of(x);
  return scores_from_leaves(e, w, leaves);
}

/// Argmax with ties resolved to the smallest class index.
inline int argmax_class(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

inline int predict_class(const Ensemble& e, std::span<const double> w, std::span<const double> x) {
  const auto f = predict_scores(e, w, x);
  return argmax_class(f);
}

inline int class_from_leaves(const Ensemble& e, std::span<const double> w, std::span<const int> leaves) {
  const auto f = scores_from_leaves(e, w, leaves);
  return argmax_class(f);
}

/// Per-feature sorted, deduplicated split thresholds.
struct ThresholdIndex {
  std::vector<std::vector<double>> per_feature;

  std::size_t n_features() const noexcept { return per_feature.size(); }
  const std::vector<double>& operator[](std::size_t j) const { return per_feature[j]; }

  /// Interval id in 0..|theta_j|: x lies in (theta[i-1], theta[i]].
  std::size_t interval_of(std::size_t j, double x) const {
    const auto& t = per_feature[j];
    return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), x) - t.begin());
  }

  std::vector<std::size_t> cell_of(std::span<const double> x) const {
    std::vector<std::size_t> out(per_feature.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = interval_of(j, x[j]);
    return out;
  }

  /// Exact position of a threshold value, if present.
  std::optional<std::size_t> position(std::size_t j, double value) const {
    const auto& t = per_feature[j];
    const auto it = std::lower_bound(t.begin(), t.end(), value);
    if (it == t.end() || *it != value) return std::nullopt;
    return static_cast<std::size_t>(it - t.begin());
  }

  double cell_count() const {
    double c = 1.0;
    for (const auto& t : per_feature) c *= static_cast<double>(t.size() + 1);
    return c;
  }

  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& t : per_feature) s += t.size();
    return s;
  }
};

inline ThresholdIndex threshold_index(const Ensemble& e, const std::vector<std::vector<double>>& extra = {}) {
  ThresholdIndex idx;
  idx.per_feature.resize(static_cast<std::size_t>(e.n_features));
  for (const auto& t : e.trees)
    for (const auto& n : t.nodes())
      if (!n.is_leaf() && n.left >= 0) idx.per_feature[static_cast<std::size_t>(n.feature)].push_back(n.threshold);
  for (std::size_t j = 0; j < extra.size() && j < idx.per_feature.size(); ++j) {
    for (double v : extra[j]) {
      if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "extra thresholds must be finite");
      idx.per_feature[j].push_back(v);
    }
  }
  for (auto& t : idx.per_feature) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  return idx;
}

// ---------------------------------------------------------------------------
// JSON schema:
//   { "n_features": p, "n_classes": C, "weights": [...], "bias": [...]?,
//     "trees": [ {"feature": j, "threshold": t, "left": node, "right": node} | {"leaf": [...]} ] }
// Feature indices are 0-based. Thresholds are written in shortest round-trip form.

namespace detail {

inline nlohmann::json tree_node_to_json(const Tree& t, int at) {
  const auto& n = t.node(at);
  if (n.is_leaf()) return nlohmann::json{{"leaf", t.leaf_scores(n.leaf)}};
  return nlohmann::json{{"feature", n.feature},
                        {"threshold", n.threshold},
                        {"left", tree_node_to_json(t, n.left)},
                        {"right", tree_node_to_json(t, n.right)}};
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::SchemaError, path + "/" + key + " is missing");
  return j.at(key);
}

inline double require_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw Error(Errc::SchemaError, path + " must be a number");
  return j.get<double>();
}

inline std::vector<double> require_numbers(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw Error(Errc::SchemaError, path + " must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(require_number(j[i], path + "/" + std::to_string(i)));
  return out;
}

inline void tree_node_from_json(Tree& t, int at, const nlohmann::json& j, const std::string& path, int depth) {
  if (depth > 64) throw Error(Errc::SchemaError, path + " nests too deeply");
  if (!j.is_object()) throw Error(Errc::SchemaError, path + " must be an object");
  if (j.contains("leaf")) {
    t.set_leaf(at, require_numbers(j.at("leaf"), path + "/leaf"));
    return;
  }
  const auto& f = require(j, "feature", path);
  if (!f.is_number_integer()) throw Error(Errc::SchemaError, path + "/feature must be an integer");
  const double thr = require_number(require(j, "threshold", path), path + "/threshold");
  const auto [l, r] = t.split(at, f.get<int>(), thr);
  tree_node_from_json(t, l, require(j, "left", path), path + "/left", depth + 1);
  tree_node_from_json(t, r, require(j, "right", path), path + "/right", depth + 1);
}

}  // namespace detail

inline nlohmann::json tree_to_json(const Tree& t) { return detail::tree_node_to_json(t, 0); }

inline Tree tree_from_json(const nlohmann::json& j, const std::string& path = "") {
  Tree t;
  detail::tree_node_from_json(t, 0, j, path, 0);
  return t;
}

inline nlohmann::json ensemble_to_json(const Ensemble& e) {
  nlohmann::json j;
  j["n_features"] = e.n_features;
  j["n_classes"] = e.n_classes;
  j["weights"] = e.weights;
  if (std::any_of(e.bias.begin(), e.bias.end(), [](double b) { return b != 0.0; })) j["bias"] = e.bias;
  auto trees = nlohmann::json::array();
  for (const auto& t : e.trees) trees.push_back(tree_to_json(t));
  j["trees"] = std::move(trees);
  return j;
}

inline Ensemble ensemble_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::SchemaError, "/ must be an object");
  Ensemble e;
  const auto& p = detail::require(j, "n_features", "");
  const auto& c = detail::require(j, "n_classes", "");
  if (!p.is_number_integer()) throw Error(Errc::SchemaError, "/n_features must be an integer");
  if (!c.is_number_integer()) throw Error(Errc::SchemaError, "/n_classes must be an integer");
  e.n_features = p.get<int>();
  e.n_classes = c.get<int>();
  const auto& trees = detail::require(j, "trees", "");
  if (!trees.is_array()) throw Error(Errc::SchemaError, "/trees must be an array");
  for (std::size_t m = 0; m < trees.size(); ++m) e.trees.push_back(tree_from_json(trees[m], "/trees/" + std::to_string(m)));
  if (j.contains("weights")) e.weights = detail::require_numbers(j.at("weights"), "/weights");
  else e.weights.assign(e.trees.size(), 1.0);
  if (j.contains("bias")) e.bias = detail::require_numbers(j.at("bias"), "/bias");
  else e.bias.assign(static_cast<std::size_t>(std::max(e.n_classes, 0)), 0.0);
  try {
    e.validate();
  } catch (const Error& err) {
    throw Error(Errc::SchemaError, std::string("/ ") + err.what());
  }
  return e;
}

/// Import a boosted-tree text dump:
///
///   booster[0]:
///   0:[f0<0.5] yes=1,no=2,missing=1
///       1:leaf=0.3
///       2:leaf=-0.2
///
/// The dump routes `x < t` left, so each threshold becomes nextafter(t, -inf)
/// under the `<=` convention. Booster k belongs to class k mod C for C > 2.
/// Binary leaf margins v are stored as (-v/2, v/2) so that F_2 - F_1 = v.
inline Ensemble convert_text_dump(std::string_view text, int n_features, int n_classes, double base_margin = 0.0) {
  if (n_classes < 2) throw Error(Errc::InvalidArgument, "n_classes must be at least 2");
  struct Line {
    int id;
    bool leaf;
    int feature;
    double thr;
    int yes;
    int no;
    double value;
  };
  std::vector<std::map<int, Line>> boosters;
  static const std::regex booster_re(R"(^\s*booster\[(\d+)\]:?\s*$)");
  static const std::regex split_re(R"(^\s*(\d+):\[f(\d+)<([^\]]+)\]\s*yes=(\d+),\s*no=(\d+).*$)");
  static const std::regex leaf_re(R"(^\s*(\d+):leaf=([^,\s]+).*$)");
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (std::regex_match(line, m, booster_re)) {
      boosters.emplace_back();
    } else if (std::regex_match(line, m, split_re)) {
      if (boosters.empty()) boosters.emplace_back();
      Line l{std::stoi(m[1]), false, std::stoi(m[2]), std::stod(m[3]), std::stoi(m[4]), std::stoi(m[5]), 0.0};
      boosters.back()[l.id] = l;
    } else if (std::regex_match(line, m, leaf_re)) {
      if (boosters.empty()) boosters.emplace_back();
      Line l{std::stoi(m[1]), true, -1, 0.0, -1, -1, std::stod(m[2])};
      boosters.back()[l.id] = l;
    } else {
      throw Error(Errc::ParseError, "dump line " + std::to_string(lineno) + " not understood: " + line);
    }
  }
  if (boosters.empty()) throw Error(Errc::EmptyDataset, "dump contains no trees");
  std::vector<Tree> trees;
  for (std::size_t k = 0; k < boosters.size(); ++k) {
    const auto& nodes = boosters[k];
    const int cls = n_classes == 2 ? -1 : static_cast<int>(k % static_cast<std::size_t>(n_classes));
    auto leaf_vec = [&](double v) {
      std::vector<double> s(static_cast<std::size_t>(n_classes), 0.0);
      if (cls < 0) {
        s[0] = -v / 2.0;
        s[1] = v / 2.0;
      } else {
        s[static_cast<std::size_t>(cls)] = v;
      }
      return s;
    };
    Tree t;
    std::vector<std::pair<int, int>> stack{{0, 0}};  // (dump id, tree node)
    while (!stack.empty()) {
      const auto [id, at] = stack.back();
      stack.pop_back();
      const auto it = nodes.find(id);
      if (it == nodes.end())
        throw Error(Errc::ParseError, "booster " + std::to_string(k) + " references missing node " + std::to_string(id));
      const auto& l = it->second;
      if (l.leaf) {
        t.set_leaf(at, leaf_vec(l.value));
      } else {
        const double thr = std::nextafter(l.thr, -std::numeric_limits<double>::infinity());
        const auto [left, right] = t.split(at, l.feature, thr);
        stack.push_back({l.no, right});
        stack.push_back({l.yes, left});
      }
    }
    trees.push_back(std::move(t));
  }
  Ensemble e = make_ensemble(std::move(trees), n_classes, n_features);
  if (n_classes == 2) {
    e.bias = {-base_margin / 2.0, base_margin / 2.0};
  } else {
    e.bias.assign(static_cast<std::size_t>(n_classes), base_margin);
  }
  e.validate();
  return e;
}

inline Ensemble load_ensemble(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& err) {
    throw Error(Errc::SchemaError, path + ": " + err.what());
  }
  return ensemble_from_json(j);
}

inline void save_ensemble(const Ensemble& e, const std::string& path) {
  write_file(path, ensemble_to_json(e).dump(1) + "\n");
}

}  // namespace pine
