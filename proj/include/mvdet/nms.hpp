#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "mvdet/geometry.hpp"

namespace mvdet {

struct DetectionCandidate {
  int frame = 0;
  int cell = 0;
  double score = 0;
  std::vector<CropRect> rects;  // one per camera; invisible where out of view
  bool operator==(const DetectionCandidate&) const = default;
};

inline double iou(const CropRect& a, const CropRect& b) { return rect_iou(a, b); }

/// Largest IoU over views; views invisible in either candidate count as 0.
inline double max_view_iou(const DetectionCandidate& a, const DetectionCandidate& b) {
  double m = 0;
  const std::size_t n = std::min(a.rects.size(), b.rects.size());
  for (std::size_t c = 0; c < n; ++c) m = std::max(m, rect_iou(a.rects[c], b.rects[c]));
  return m;
}

struct NmsOptions {
  double overlap = 0.4;
  /// Also drop candidates whose cell is closer than this Chebyshev distance to
  /// an accepted one; 0 disables the filter.
  int min_cell_distance = 0;
  int grid_cols = 0;  // needed by min_cell_distance
};

/// Greedy suppression in descending score order (ties: lower cell first).
inline std::vector<DetectionCandidate> score_weighted_nms(std::vector<DetectionCandidate> cands,
                                                          const NmsOptions& opt = {}) {
  if (!(opt.overlap >= 0 && opt.overlap <= 1)) throw ValidationError("NMS threshold must lie in [0, 1]");
  if (opt.min_cell_distance > 0 && opt.grid_cols <= 0)
    throw ValidationError("min_cell_distance needs the grid column count");
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.cell < b.cell;
  });
  std::vector<DetectionCandidate> kept;
  for (auto& c : cands) {
    bool ok = true;
    for (const auto& k : kept) {
      if (max_view_iou(c, k) > opt.overlap) ok = false;
      if (opt.min_cell_distance > 0) {
        const int dr = std::abs(c.cell / opt.grid_cols - k.cell / opt.grid_cols);
        const int dc = std::abs(c.cell % opt.grid_cols - k.cell % opt.grid_cols);
        if (std::max(dr, dc) < opt.min_cell_distance) ok = false;
      }
      if (!ok) break;
    }
    if (ok) kept.push_back(std::move(c));
  }
  return kept;
}

inline std::vector<DetectionCandidate> score_weighted_nms(std::vector<DetectionCandidate> cands, double overlap) {
  return score_weighted_nms(std::move(cands), NmsOptions{overlap, 0, 0});
}

}  // namespace mvdet
