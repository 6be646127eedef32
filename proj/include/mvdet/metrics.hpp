#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mvdet/errors.hpp"
#include "mvdet/geometry.hpp"

namespace mvdet {

enum class MatchMode { ground_distance, bbox_iou };

struct MatchConfig {
  MatchMode mode = MatchMode::ground_distance;
  /// Meters for ground_distance; minimum IoU for bbox_iou.
  double radius = 0.5;
};

struct FrameEval {
  int frame_id = 0;
  int tp = 0, fp = 0, fn = 0;
  std::vector<double> matched_scores;
  std::vector<std::pair<int, int>> matches;  // (detection index, ground-truth index)
};

/// Minimum-cost perfect assignment on an n x n matrix (row -> column).
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(n + 1));
  std::vector<int> p(static_cast<std::size_t>(n + 1)), way(static_cast<std::size_t>(n + 1));
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

/// Maximum-cardinality matching among allowed pairs, then minimum total
/// cost among those. `cost[i][j]` is ignored where `allowed[i][j]` is false.
inline std::vector<std::pair<int, int>> optimal_matching(const std::vector<std::vector<double>>& cost,
                                                         const std::vector<std::vector<char>>& allowed,
                                                         std::size_t n_rows, std::size_t n_cols) {
  const std::size_t k = std::max(n_rows, n_cols);
  if (k == 0) return {};
  double max_cost = 0;
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t j = 0; j < n_cols; ++j)
      if (allowed[i][j]) max_cost = std::max(max_cost, std::abs(cost[i][j]));
  // each extra match saves more than any achievable cost difference
  const double big = (max_cost + 1.0) * static_cast<double>(std::min(n_rows, n_cols) + 1);
  std::vector<std::vector<double>> c(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t j = 0; j < n_cols; ++j)
      if (allowed[i][j]) c[i][j] = cost[i][j] - big;
  const auto assign = hungarian(c);
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < n_rows; ++i) {
    const int j = assign[i];
    if (j >= 0 && static_cast<std::size_t>(j) < n_cols && allowed[i][static_cast<std::size_t>(j)])
      out.emplace_back(static_cast<int>(i), j);
  }
  return out;
}

inline FrameEval evaluate_matches(int frame_id, std::size_t n_det, std::size_t n_gt,
                                  const std::vector<std::pair<int, int>>& matches, const std::vector<double>& scores) {
  FrameEval e;
  e.frame_id = frame_id;
  e.tp = static_cast<int>(matches.size());
  e.fp = static_cast<int>(n_det) - e.tp;
  e.fn = static_cast<int>(n_gt) - e.tp;
  e.matched_scores = scores;
  e.matches = matches;
  return e;
}

/// Ground-plane matching: pairs within `radius` meters (inclusive) are
/// allowed, total distance minimized; localization score 1 - d / radius.
inline FrameEval match_frame(int frame_id, const std::vector<int>& det_cells, const std::vector<int>& gt_cells,
                             const GroundGrid& grid, const MatchConfig& cfg = {}) {
  if (!(cfg.radius > 0)) throw ValidationError("match radius must be positive");
  if (cfg.mode != MatchMode::ground_distance) throw ValidationError("bbox_iou matching needs rectangles");
  const std::size_t n = det_cells.size(), m = gt_cells.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(m));
  std::vector<std::vector<char>> allowed(n, std::vector<char>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cost[i][j] = grid.cell_distance(det_cells[i], gt_cells[j]);
      allowed[i][j] = cost[i][j] <= cfg.radius + 1e-12;
    }
  const auto matches = optimal_matching(cost, allowed, n, m);
  std::vector<double> scores;
  for (auto [i, j] : matches)
    scores.push_back(std::max(0.0, 1.0 - cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / cfg.radius));
  return evaluate_matches(frame_id, n, m, matches, scores);
}

/// Image-space matching on rectangles: pairs with IoU >= cfg.radius are
/// allowed, total (1 - IoU) minimized; localization score is the IoU.
inline FrameEval match_frame_rects(int frame_id, const std::vector<CropRect>& dets, const std::vector<CropRect>& gts,
                                   const MatchConfig& cfg) {
  if (!(cfg.radius > 0 && cfg.radius <= 1)) throw ValidationError("IoU threshold must lie in (0, 1]");
  const std::size_t n = dets.size(), m = gts.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(m));
  std::vector<std::vector<char>> allowed(n, std::vector<char>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double o = rect_iou(dets[i], gts[j]);
      cost[i][j] = 1.0 - o;
      allowed[i][j] = o >= cfg.radius;
    }
  const auto matches = optimal_matching(cost, allowed, n, m);
  std::vector<double> scores;
  for (auto [i, j] : matches) scores.push_back(1.0 - cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  return evaluate_matches(frame_id, n, m, matches, scores);
}

struct Totals {
  long tp = 0, fp = 0, fn = 0;
};

inline Totals totals(const std::vector<FrameEval>& frames) {
  Totals t;
  for (const auto& f : frames) {
    t.tp += f.tp;
    t.fp += f.fp;
    t.fn += f.fn;
  }
  return t;
}

/// 1 - (misses + false positives) / ground truth.
inline double moda(const std::vector<FrameEval>& frames) {
  const Totals t = totals(frames);
  if (t.tp + t.fn == 0) throw NoGroundTruth("MODA needs at least one ground-truth object");
  return 1.0 - static_cast<double>(t.fn + t.fp) / static_cast<double>(t.tp + t.fn);
}

struct ModpResult {
  double value = 0;
  int frames_used = 0;
  int frames_without_matches = 0;
};

/// Mean over frames with at least one match of the per-frame mean
/// localization score.
inline ModpResult modp_detail(const std::vector<FrameEval>& frames) {
  ModpResult r;
  double sum = 0;
  for (const auto& f : frames) {
    if (f.tp == 0) {
      ++r.frames_without_matches;
      continue;
    }
    double s = 0;
    for (double v : f.matched_scores) s += v;
    sum += s / f.tp;
    ++r.frames_used;
  }
  if (r.frames_used == 0) throw NoMatches("MODP needs at least one matched detection");
  r.value = sum / r.frames_used;
  return r;
}

inline double modp(const std::vector<FrameEval>& frames) { return modp_detail(frames).value; }

inline std::pair<double, double> precision_recall(const std::vector<FrameEval>& frames) {
  const Totals t = totals(frames);
  if (t.tp + t.fp == 0) throw UndefinedMetric("precision undefined without detections");
  if (t.tp + t.fn == 0) throw UndefinedMetric("recall undefined without ground truth");
  return {static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp),
          static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn)};
}

struct RocPoint {
  double threshold = 0;
  double tpr = 0;
  double fpr = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0) with threshold +inf
  double auc = 0;
};

/// Threshold sweep over distinct scores (predict positive when score >=
/// threshold) with trapezoidal area; tied scores move in one step.
inline RocCurve roc_auc(const std::vector<std::pair<double, int>>& scored) {
  double P = 0, N = 0;
  for (const auto& [s, y] : scored) (y == 1 ? P : N) += 1;
  if (P == 0 || N == 0) throw SingleClass("ROC needs both labels");
  std::vector<std::pair<double, int>> v = scored;
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  RocCurve c;
  c.points.push_back({std::numeric_limits<double>::infinity(), 0, 0});
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < v.size();) {
    const double thr = v[i].first;
    for (; i < v.size() && v[i].first == thr; ++i) (v[i].second == 1 ? tp : fp) += 1;
    const RocPoint& prev = c.points.back();
    const RocPoint cur{thr, tp / P, fp / N};
    c.auc += (cur.fpr - prev.fpr) * (cur.tpr + prev.tpr) / 2.0;
    c.points.push_back(cur);
  }
  return c;
}

}  // namespace mvdet
