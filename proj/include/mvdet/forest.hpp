#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvdet/errors.hpp"
#include "mvdet/features.hpp"
#include "mvdet/rng.hpp"

namespace mvdet {

/// Flat tree node; leaves have feature -1 and no children.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1, right = -1;
  int depth = 0;
  std::array<double, 2> counts{0, 0};  // (negatives, positives) reaching the node

  bool is_leaf() const { return left < 0; }
  double positive_fraction() const {
    const double n = counts[0] + counts[1];
    return n > 0 ? counts[1] / n : 0.0;
  }
  bool operator==(const TreeNode&) const = default;
};

/// Node 0 is the root; children always come after their parent.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::size_t n_features = 0;

  std::size_t internal_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return !n.is_leaf(); }));
  }
  int max_depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }
  bool operator==(const DecisionTree&) const = default;
};

struct TreeOptions {
  int max_depth = 12;
  std::size_t min_leaf = 2;
  /// Features tried per node; 0 means all.
  std::size_t max_features = 0;
};

struct ForestOptions {
  std::size_t n_trees = 100;
  TreeOptions tree;
  bool bootstrap = true;
  /// When set, each node tries floor(sqrt(D)) random features.
  bool sqrt_features = true;
  std::uint64_t seed = 0;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double impurity = 0;  // weighted Gini of the children, n_l g_l + n_r g_r over n
};

namespace detail {

inline double gini_sum(double a, double b) {
  const double n = a + b;
  return n > 0 ? n - (a * a + b * b) / n : 0.0;
}

/// Best split of rows `idx` over `features`: candidate thresholds are
/// midpoints between consecutive distinct values, x <= threshold goes left.
/// Earlier features and smaller thresholds win ties.
inline SplitChoice best_split(const FeatureMatrix& x, std::span<const int> y, std::span<const std::uint32_t> idx,
                              std::span<const std::size_t> features, std::size_t min_leaf) {
  SplitChoice best;
  double best_score = std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(idx.size());
  double tot[2] = {0, 0};
  for (auto i : idx) tot[y[i]] += 1;
  std::vector<std::pair<float, int>> v(idx.size());
  for (std::size_t f : features) {
    for (std::size_t k = 0; k < idx.size(); ++k) v[k] = {x.data[idx[k] * x.cols + f], y[idx[k]]};
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double l[2] = {0, 0};
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      l[v[k].second] += 1;
      if (v[k].first == v[k + 1].first) continue;
      const std::size_t nl = k + 1, nr = v.size() - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double score = gini_sum(l[0], l[1]) + gini_sum(tot[0] - l[0], tot[1] - l[1]);
      if (score < best_score) {
        best_score = score;
        best.feature = static_cast<int>(f);
        best.threshold = (static_cast<double>(v[k].first) + static_cast<double>(v[k + 1].first)) / 2.0;
      }
    }
  }
  if (best.feature >= 0) best.impurity = best_score / n;
  return best;
}

inline void check_training_data(const FeatureMatrix& x, std::span<const int> y) {
  if (x.rows != y.size()) throw ShapeMismatch("feature rows and labels differ in length");
  if (x.rows < 2) throw InsufficientData("tree training needs at least 2 samples");
  if (x.cols == 0) throw ShapeMismatch("feature rows are empty");
  for (int v : y)
    if (v != 0 && v != 1) throw LabelOutOfRange("tree labels must be 0 or 1");
}

/// Grows a tree breadth-first over the (possibly repeated) rows `rows`.
inline DecisionTree grow(const FeatureMatrix& x, std::span<const int> y, std::vector<std::uint32_t> rows,
                         const TreeOptions& opt, std::mt19937_64* rng) {
  DecisionTree t;
  t.n_features = x.cols;
  const std::size_t m = opt.max_features == 0 ? x.cols : std::min(opt.max_features, x.cols);
  std::vector<std::size_t> all(x.cols);
  std::iota(all.begin(), all.end(), std::size_t{0});
  struct Pending {
    int node;
    std::vector<std::uint32_t> rows;
  };
  std::deque<Pending> queue;
  t.nodes.push_back({});
  queue.push_back({0, std::move(rows)});
  while (!queue.empty()) {
    Pending p = std::move(queue.front());
    queue.pop_front();
    TreeNode& node = t.nodes[static_cast<std::size_t>(p.node)];
    for (auto i : p.rows) node.counts[static_cast<std::size_t>(y[i])] += 1;
    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    if (pure || node.depth >= opt.max_depth || p.rows.size() < 2 * std::max<std::size_t>(opt.min_leaf, 1)) continue;
    std::span<const std::size_t> feats = all;
    std::vector<std::size_t> sub;
    if (m < x.cols) {
      sub = all;
      for (std::size_t k = 0; k < m; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, sub.size() - 1);
        std::swap(sub[k], sub[pick(*rng)]);
      }
      sub.resize(m);
      feats = sub;
    }
    const SplitChoice s = best_split(x, y, p.rows, feats, std::max<std::size_t>(opt.min_leaf, 1));
    if (s.feature < 0) continue;
    std::vector<std::uint32_t> lr, rr;
    for (auto i : p.rows) {
      const double v = x.data[i * x.cols + static_cast<std::size_t>(s.feature)];
      (v <= s.threshold ? lr : rr).push_back(i);
    }
    const int depth = node.depth;
    const int li = static_cast<int>(t.nodes.size());
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = li;
    node.right = li + 1;
    // node reference is invalid after these pushes
    t.nodes.push_back(TreeNode{-1, 0, -1, -1, depth + 1, {0, 0}});
    t.nodes.push_back(TreeNode{-1, 0, -1, -1, depth + 1, {0, 0}});
    queue.push_back({li, std::move(lr)});
    queue.push_back({li + 1, std::move(rr)});
  }
  return t;
}

}  // namespace detail

/// CART tree on all rows with every feature considered at each node.
inline DecisionTree train_tree(const FeatureMatrix& x, std::span<const int> y, const TreeOptions& opt = {}) {
  detail::check_training_data(x, y);
  if (opt.max_depth < 0) throw ValidationError("max_depth must be nonnegative");
  std::vector<std::uint32_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), 0u);
  std::mt19937_64 rng(0);
  return detail::grow(x, y, std::move(rows), opt, &rng);
}

inline double tree_predict(const DecisionTree& t, std::span<const float> v) {
  if (v.size() != t.n_features) throw DimensionMismatch("feature vector length does not match the tree");
  std::size_t i = 0;
  while (!t.nodes[i].is_leaf()) {
    const auto& n = t.nodes[i];
    i = static_cast<std::size_t>(static_cast<double>(v[static_cast<std::size_t>(n.feature)]) <= n.threshold ? n.left
                                                                                                        : n.right);
  }
  return t.nodes[i].positive_fraction();
}

struct Forest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  bool operator==(const Forest&) const = default;
};

inline Forest train_forest(const FeatureMatrix& x, std::span<const int> y, const ForestOptions& opt = {}) {
  detail::check_training_data(x, y);
  if (opt.n_trees == 0) throw ValidationError("forest needs at least one tree");
  Forest f;
  f.n_features = x.cols;
  f.seed = opt.seed;
  TreeOptions topt = opt.tree;
  if (opt.sqrt_features)
    topt.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols))));
  for (std::size_t k = 0; k < opt.n_trees; ++k) {
    std::mt19937_64 rng(derive_seed(opt.seed, {21, k}));
    std::vector<std::uint32_t> rows(x.rows);
    if (opt.bootstrap) {
      std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(x.rows - 1));
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    f.trees.push_back(detail::grow(x, y, std::move(rows), topt, &rng));
  }
  return f;
}

/// Mean over trees of the leaf positive-class frequency.
inline double predict_proba(const Forest& f, std::span<const float> v) {
  if (v.size() != f.n_features) throw DimensionMismatch("feature vector length does not match the forest");
  double s = 0;
  for (const auto& t : f.trees) s += tree_predict(t, v);
  return f.trees.empty() ? 0.0 : s / static_cast<double>(f.trees.size());
}

inline std::vector<double> predict_proba(const Forest& f, const FeatureMatrix& x) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_proba(f, x.row(i));
  return out;
}

/// Internal nodes in breadth-first order, left child before right.
inline std::vector<int> internal_nodes_bfs(const DecisionTree& t) {
  std::vector<int> out;
  if (t.nodes.empty()) return out;
  std::deque<int> q{0};
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) continue;
    out.push_back(i);
    q.push_back(n.left);
    q.push_back(n.right);
  }
  return out;
}

/// Per-view usage among the first `top_k` internal nodes; feature i belongs
/// to view i / Q. Repeated features count once per node.
inline std::vector<std::size_t> feature_view_distribution(const DecisionTree& t, std::size_t top_k, std::size_t Q,
                                                          std::size_t C) {
  if (Q == 0 || C == 0) throw ValidationError("Q and C must be positive");
  std::vector<std::size_t> counts(C, 0);
  const auto order = internal_nodes_bfs(t);
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    const std::size_t view = static_cast<std::size_t>(t.nodes[static_cast<std::size_t>(order[k])].feature) / Q;
    if (view >= C) throw DimensionMismatch("feature index beyond C views");
    ++counts[view];
  }
  return counts;
}

inline nlohmann::json tree_to_json(const DecisionTree& t) {
  nlohmann::json f = nlohmann::json::array(), th = nlohmann::json::array(), l = nlohmann::json::array(),
                 r = nlohmann::json::array(), d = nlohmann::json::array(), c = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    f.push_back(n.feature);
    th.push_back(n.threshold);
    l.push_back(n.left);
    r.push_back(n.right);
    d.push_back(n.depth);
    c.push_back({n.counts[0], n.counts[1]});
  }
  return {{"feature", f}, {"threshold", th}, {"left", l}, {"right", r}, {"depth", d}, {"counts", c}};
}

inline DecisionTree tree_from_json(const nlohmann::json& j, std::size_t n_features) {
  DecisionTree t;
  t.n_features = n_features;
  const std::size_t n = j.at("feature").size();
  for (const char* key : {"threshold", "left", "right", "depth", "counts"})
    if (j.at(key).size() != n) throw ValidationError(std::string("tree field '") + key + "' has the wrong length");
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode node;
    node.feature = j["feature"][i];
    node.threshold = j["threshold"][i];
    node.left = j["left"][i];
    node.right = j["right"][i];
    node.depth = j["depth"][i];
    node.counts = {j["counts"][i].at(0).get<double>(), j["counts"][i].at(1).get<double>()};
    const bool leaf = node.left < 0;
    if (leaf != (node.right < 0) || (leaf != (node.feature < 0)))
      throw ValidationError("tree node " + std::to_string(i) + " is half a split");
    if (!leaf && (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                  node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n) ||
                  static_cast<std::size_t>(node.feature) >= n_features))
      throw ValidationError("tree node " + std::to_string(i) + " has invalid links");
    t.nodes.push_back(node);
  }
  if (t.nodes.empty()) throw ValidationError("tree has no nodes");
  return t;
}

inline nlohmann::json forest_to_json(const Forest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
  return {{"format", "mvdet-forest-1"}, {"n_features", f.n_features}, {"seed", f.seed}, {"trees", trees}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mvdet-forest-1") throw ValidationError("not an mvdet forest document");
  Forest f;
  f.n_features = j.at("n_features");
  f.seed = j.at("seed");
  for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t, f.n_features));
  if (f.trees.empty()) throw ValidationError("forest has no trees");
  return f;
}

}  // namespace mvdet
