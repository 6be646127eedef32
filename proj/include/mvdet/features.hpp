#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mvdet/errors.hpp"
#include "mvdet/tensor.hpp"

namespace mvdet {

/// Row-major single-precision feature rows, one per sample.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  /// Rows `idx` as a double tensor.
  Tensor gather(std::span<const std::size_t> idx) const {
    Tensor t({idx.size(), cols});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto r = row(idx[k]);
      std::copy(r.begin(), r.end(), t.data() + k * cols);
    }
    return t;
  }

  /// Keeps the column blocks of the listed views (each `block` wide).
  FeatureMatrix select_views(const std::vector<std::size_t>& views, std::size_t block) const {
    FeatureMatrix out(rows, views.size() * block);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t v = 0; v < views.size(); ++v) {
        if ((views[v] + 1) * block > cols) throw DimensionMismatch("view block outside feature row");
        std::copy_n(data.data() + i * cols + views[v] * block, block, out.data.data() + i * out.cols + v * block);
      }
    return out;
  }
};

}  // namespace mvdet
