#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mvdet/forest.hpp"

using namespace mvdet;

namespace {

FeatureMatrix matrix(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

struct OracleSplit {
  double impurity = 0;
  std::vector<std::pair<int, double>> optimal;  // every (feature, threshold) reaching the minimum
};

/// Tries every feature and every midpoint; impurity as the size-weighted
/// mean of 1 - p^2 - q^2.
OracleSplit exhaustive_split(const FeatureMatrix& x, const std::vector<int>& y) {
  OracleSplit best{std::numeric_limits<double>::infinity(), {}};
  const double n = static_cast<double>(x.rows);
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::set<float> values;
    for (std::size_t i = 0; i < x.rows; ++i) values.insert(x.row(i)[f]);
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = (static_cast<double>(*it) + static_cast<double>(*std::next(it))) / 2.0;
      double cnt[2][2] = {{0, 0}, {0, 0}};
      for (std::size_t i = 0; i < x.rows; ++i) cnt[x.row(i)[f] <= thr ? 0 : 1][y[i]] += 1;
      double g = 0;
      for (auto& side : cnt) {
        const double m = side[0] + side[1];
        const double p = side[0] / m, q = side[1] / m;
        g += m / n * (1 - p * p - q * q);
      }
      if (g < best.impurity - 1e-12) best = {g, {}};
      if (std::abs(g - best.impurity) <= 1e-12) best.optimal.emplace_back(static_cast<int>(f), thr);
    }
  }
  return best;
}

double child_impurity(const DecisionTree& t, int node) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  const double total = n.counts[0] + n.counts[1];
  double g = 0;
  for (int c : {n.left, n.right}) {
    const auto& k = t.nodes[static_cast<std::size_t>(c)];
    const double m = k.counts[0] + k.counts[1];
    g += m / total * (1 - std::pow(k.counts[0] / m, 2) - std::pow(k.counts[1] / m, 2));
  }
  return g;
}

double traverse(const DecisionTree& t, int i, std::span<const float> v) {
  const auto& n = t.nodes[static_cast<std::size_t>(i)];
  if (n.left < 0) return n.counts[1] / (n.counts[0] + n.counts[1]);
  return traverse(t, v[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right, v);
}

double accuracy(const Forest& f, const FeatureMatrix& x, const std::vector<int>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < x.rows; ++i) ok += (predict_proba(f, x.row(i)) >= 0.5) == (y[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(x.rows);
}

void noisy_blobs(std::mt19937_64& rng, std::size_t n, std::size_t dim, FeatureMatrix& x, std::vector<int>& y) {
  std::normal_distribution<float> g(0, 1);
  x = FeatureMatrix(n, dim);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    // signal spread thinly over all features
    for (std::size_t f = 0; f < dim; ++f) x.row(i)[f] = g(rng) + (y[i] ? 0.6f : -0.6f);
  }
}

DecisionTree hand_tree(const std::vector<int>& features) {
  // chain: internal node k at index 2k, its left leaf at 2k+1, right child at 2k+2
  DecisionTree t;
  t.n_features = 1000;
  const int k = static_cast<int>(features.size());
  for (int i = 0; i < k; ++i) {
    t.nodes.push_back({features[static_cast<std::size_t>(i)], 0.0, 2 * i + 1, 2 * i + 2, i, {1, 1}});
    t.nodes.push_back({-1, 0, -1, -1, i + 1, {1, 0}});
  }
  t.nodes.push_back({-1, 0, -1, -1, k, {0, 1}});
  return t;
}

}  // namespace

TEST(Tree, OneDimensionalSeparable) {
  const auto x = matrix({{0.1f}, {0.2f}, {0.3f}, {0.7f}, {0.8f}, {0.9f}});
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto t = train_tree(x, y, {12, 1, 0});
  EXPECT_EQ(t.max_depth(), 1);
  ASSERT_EQ(t.internal_count(), 1u);
  EXPECT_NEAR(t.nodes[0].threshold, 0.5, 1e-7);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(tree_predict(t, x.row(i)), static_cast<double>(y[i]));
}

TEST(Tree, XorNeedsDepthTwo) {
  const auto x = matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const std::vector<int> y{0, 1, 1, 0, 0, 1, 1, 0};
  auto acc = [&](const DecisionTree& t) {
    int ok = 0;
    for (std::size_t i = 0; i < x.rows; ++i) ok += (tree_predict(t, x.row(i)) >= 0.5) == (y[i] == 1);
    return ok / 8.0;
  };
  EXPECT_LT(acc(train_tree(x, y, {1, 1, 0})), 1.0);
  EXPECT_EQ(acc(train_tree(x, y, {2, 1, 0})), 1.0);
}

TEST(Tree, PureAndDegenerateInputs) {
  const auto x = matrix({{1}, {2}, {3}});
  const auto t = train_tree(x, std::vector<int>{1, 1, 1});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(tree_predict(t, x.row(0)), 1.0);
  EXPECT_THROW(train_tree(matrix({{1}}), std::vector<int>{1}), InsufficientData);
  EXPECT_THROW(train_tree(x, std::vector<int>{0, 2, 1}), LabelOutOfRange);
  EXPECT_THROW(train_tree(x, std::vector<int>{0, 1}), ShapeMismatch);
  // constant features cannot be split
  const auto c = train_tree(matrix({{5}, {5}, {5}, {5}}), std::vector<int>{0, 1, 0, 1}, {12, 1, 0});
  EXPECT_EQ(c.nodes.size(), 1u);
  EXPECT_EQ(tree_predict(c, x.row(0)), 0.5);
}

TEST(Tree, StructuralInvariants) {
  std::mt19937_64 rng(4);
  FeatureMatrix x;
  std::vector<int> y;
  noisy_blobs(rng, 300, 6, x, y);
  const auto t = train_tree(x, y, {5, 3, 0});
  EXPECT_LE(t.max_depth(), 5);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) {
      EXPECT_EQ(n.right, -1);
      EXPECT_GE(n.counts[0] + n.counts[1], 3.0);
      continue;
    }
    for (int c : {n.left, n.right}) {
      EXPECT_GT(c, static_cast<int>(i));
      EXPECT_EQ(t.nodes[static_cast<std::size_t>(c)].depth, n.depth + 1);
    }
    const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
    const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
    EXPECT_EQ(l.counts[0] + r.counts[0], n.counts[0]);
    EXPECT_EQ(l.counts[1] + r.counts[1], n.counts[1]);
  }
}

TEST(Tree, RootSplitMatchesExhaustiveOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> size(2, 30), dim(1, 4), level(0, 5);
  int checked = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = static_cast<std::size_t>(size(rng)), d = static_cast<std::size_t>(dim(rng));
    FeatureMatrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < d; ++f) x.row(i)[f] = static_cast<float>(level(rng)) * 0.25f;
      y[i] = level(rng) % 2;
    }
    if (std::count(y.begin(), y.end(), 1) % static_cast<long>(n) == 0) continue;
    const auto oracle = exhaustive_split(x, y);
    const auto tree = train_tree(x, y, {1, 1, 0});
    if (oracle.optimal.empty()) {
      EXPECT_EQ(tree.nodes.size(), 1u);
      continue;
    }
    ASSERT_EQ(tree.nodes.size(), 3u) << "instance " << t;
    EXPECT_NEAR(child_impurity(tree, 0), oracle.impurity, 1e-12) << "instance " << t;
    // first optimum in (feature, threshold) order under the tie rule
    EXPECT_EQ(tree.nodes[0].feature, oracle.optimal.front().first) << "instance " << t;
    EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, oracle.optimal.front().second) << "instance " << t;
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(Forest, SingleTreeWithoutBaggingEqualsTree) {
  std::mt19937_64 rng(5);
  FeatureMatrix x;
  std::vector<int> y;
  noisy_blobs(rng, 200, 5, x, y);
  ForestOptions o;
  o.n_trees = 1;
  o.bootstrap = false;
  o.sqrt_features = false;
  const auto f = train_forest(x, y, o);
  EXPECT_EQ(f.trees[0], train_tree(x, y, o.tree));
}

TEST(Forest, PredictionExamples) {
  DecisionTree pos;
  pos.n_features = 1;
  pos.nodes = {{0, 0.5, 1, 2, 0, {0, 4}}, {-1, 0, -1, -1, 1, {0, 2}}, {-1, 0, -1, -1, 1, {0, 2}}};
  DecisionTree neg = pos;
  for (auto& n : neg.nodes) n.counts = {n.counts[1], 0};
  const std::vector<float> v{0.3f};
  EXPECT_EQ(predict_proba(Forest{{pos, pos}, 1, 0}, v), 1.0);
  EXPECT_EQ(predict_proba(Forest{{pos, neg}, 1, 0}, v), 0.5);
  EXPECT_THROW(predict_proba(Forest{{pos}, 1, 0}, std::vector<float>{1, 2}), DimensionMismatch);
}

TEST(Forest, MatchesTraversalOracleAndIsDeterministic) {
  std::mt19937_64 rng(6);
  FeatureMatrix x;
  std::vector<int> y;
  noisy_blobs(rng, 300, 9, x, y);
  ForestOptions o;
  o.n_trees = 10;
  o.seed = 42;
  const auto f = train_forest(x, y, o);
  EXPECT_EQ(f, train_forest(x, y, o));
  FeatureMatrix probe;
  std::vector<int> unused;
  noisy_blobs(rng, 100, 9, probe, unused);
  for (std::size_t i = 0; i < probe.rows; ++i) {
    double s = 0;
    for (const auto& t : f.trees) s += traverse(t, 0, probe.row(i));
    EXPECT_NEAR(predict_proba(f, probe.row(i)), s / 10.0, 1e-15);
  }
  o.seed = 43;
  EXPECT_NE(train_forest(x, y, o), f);
}

TEST(Forest, EnsembleAtLeastSingleTreeMedian) {
  std::vector<double> gap;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    std::mt19937_64 rng(s);
    FeatureMatrix xtr, xte;
    std::vector<int> ytr, yte;
    noisy_blobs(rng, 300, 16, xtr, ytr);
    noisy_blobs(rng, 300, 16, xte, yte);
    ForestOptions single;
    single.n_trees = 1;
    single.bootstrap = false;
    single.sqrt_features = false;
    ForestOptions many;
    many.seed = s;
    gap.push_back(accuracy(train_forest(xtr, ytr, many), xte, yte) - accuracy(train_forest(xtr, ytr, single), xte, yte));
  }
  std::nth_element(gap.begin(), gap.begin() + 2, gap.end());
  EXPECT_GE(gap[2], 0.0);
}

TEST(ViewDistribution, HandFixtures) {
  const std::size_t Q = 10;
  EXPECT_EQ(feature_view_distribution(hand_tree({0, 10, 20}), 50, Q, 3), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(feature_view_distribution(hand_tree({0, 1, 2, 3, 4, 9}), 50, Q, 3), (std::vector<std::size_t>{6, 0, 0}));
  // top_k truncates in breadth-first order
  EXPECT_EQ(feature_view_distribution(hand_tree({25, 15, 5, 5}), 2, Q, 3), (std::vector<std::size_t>{0, 1, 1}));
  // repeated features count per occurrence
  EXPECT_EQ(feature_view_distribution(hand_tree({12, 12, 12}), 50, Q, 3), (std::vector<std::size_t>{0, 3, 0}));
  EXPECT_THROW(feature_view_distribution(hand_tree({35}), 5, Q, 3), DimensionMismatch);
}

TEST(ViewDistribution, BreadthFirstOrder) {
  // root(f=0) -> left(f=10), right(f=20); left -> left(f=21)
  DecisionTree t;
  t.n_features = 30;
  t.nodes = {{0, 0, 1, 2, 0, {2, 2}},       {10, 0, 3, 4, 1, {1, 1}}, {20, 0, 5, 6, 1, {1, 1}},
             {21, 0, 7, 8, 2, {1, 0}},      {-1, 0, -1, -1, 2, {0, 1}}, {-1, 0, -1, -1, 2, {1, 0}},
             {-1, 0, -1, -1, 2, {0, 1}},    {-1, 0, -1, -1, 3, {1, 0}}, {-1, 0, -1, -1, 3, {0, 0}}};
  EXPECT_EQ(internal_nodes_bfs(t), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(feature_view_distribution(t, 3, 10, 3), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(feature_view_distribution(t, 4, 10, 3), (std::vector<std::size_t>{1, 1, 2}));
}

TEST(ViewDistribution, CountsSumToNodesUsed) {
  std::mt19937_64 rng(9);
  FeatureMatrix x;
  std::vector<int> y;
  noisy_blobs(rng, 400, 12, x, y);
  ForestOptions o;
  o.n_trees = 5;
  const auto f = train_forest(x, y, o);
  for (const auto& t : f.trees)
    for (std::size_t k : {1u, 10u, 50u, 1000u}) {
      const auto c = feature_view_distribution(t, k, 4, 3);
      EXPECT_EQ(std::accumulate(c.begin(), c.end(), std::size_t{0}), std::min(k, t.internal_count()));
    }
}

TEST(ForestJson, RoundTripAndValidation) {
  std::mt19937_64 rng(10);
  FeatureMatrix x;
  std::vector<int> y;
  noisy_blobs(rng, 120, 4, x, y);
  ForestOptions o;
  o.n_trees = 3;
  const auto f = train_forest(x, y, o);
  const auto back = forest_from_json(nlohmann::json::parse(forest_to_json(f).dump()));
  EXPECT_EQ(back, f);
  auto j = forest_to_json(f);
  j["trees"][0]["left"][0] = 0;
  EXPECT_THROW(forest_from_json(j), ValidationError);
  j = forest_to_json(f);
  j["format"] = "other";
  EXPECT_THROW(forest_from_json(j), ValidationError);
}
