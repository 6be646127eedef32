#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvdet/errors.hpp"
#include "mvdet/tensor.hpp"

namespace mvdet {

/// Normalized patch rectangle, x to the right and y down, in [0,1]^2.
struct NormRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const NormRect&) const = default;
};

struct OcclusionMask {
  int mask_id = 1;
  NormRect rect;
  double jitter = 0;  // each interior edge moves by U[-jitter, jitter]
  bool operator==(const OcclusionMask&) const = default;
};

using MaskTable = std::vector<OcclusionMask>;

inline MaskTable default_mask_table() {
  constexpr double j = 0.1;
  return {
      {1, {0, 0, 0, 0}, 0},       {2, {0, 0, 0.5, 1}, j},        {3, {0.5, 0, 1, 1}, j},
      {4, {0, 0.5, 1, 1}, j},     {5, {0, 0, 1, 1.0 / 3}, j},    {6, {0, 0.5, 0.5, 1}, j},
      {7, {0.5, 0.5, 1, 1}, j},
  };
}

inline void validate_mask_table(const MaskTable& table) {
  if (table.empty()) throw ValidationError("mask table is empty");
  for (const auto& m : table) {
    const auto& r = m.rect;
    const bool in_unit = r.x0 >= 0 && r.y0 >= 0 && r.x1 <= 1 && r.y1 <= 1 && r.x0 <= r.x1 && r.y0 <= r.y1;
    if (!in_unit) throw ValidationError("mask " + std::to_string(m.mask_id) + ": rect outside [0,1]^2");
    if (!(m.jitter >= 0 && m.jitter < 0.5)) throw ValidationError("mask " + std::to_string(m.mask_id) + ": bad jitter");
  }
}

inline MaskTable mask_table_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("mask table must be a JSON list");
  MaskTable t;
  try {
    for (const auto& e : j) {
      const auto r = e.at("rect");
      if (!r.is_array() || r.size() != 4) throw ValidationError("mask rect must have four entries");
      t.push_back({e.at("mask_id").get<int>(),
                   {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()},
                   e.value("jitter", 0.0)});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("mask table: ") + ex.what());
  }
  validate_mask_table(t);
  return t;
}

inline nlohmann::json mask_table_to_json(const MaskTable& t) {
  auto j = nlohmann::json::array();
  for (const auto& m : t)
    j.push_back({{"mask_id", m.mask_id}, {"rect", {m.rect.x0, m.rect.y0, m.rect.x1, m.rect.y1}}, {"jitter", m.jitter}});
  return j;
}

/// Jittered copy of a mask rectangle. Edges lying on the patch border stay
/// there; interior edges move independently and are clamped to [0,1].
inline NormRect jitter_rect(const OcclusionMask& m, std::mt19937_64& rng) {
  NormRect r = m.rect;
  if (m.jitter <= 0 || (r.x1 <= r.x0) || (r.y1 <= r.y0)) return r;
  std::uniform_real_distribution<double> d(-m.jitter, m.jitter);
  auto move = [&](double& e) {
    if (e > 0 && e < 1) e = std::clamp(e + d(rng), 0.0, 1.0);
  };
  move(r.x0);
  move(r.y0);
  move(r.x1);
  move(r.y1);
  if (r.x1 < r.x0) std::swap(r.x0, r.x1);
  if (r.y1 < r.y0) std::swap(r.y0, r.y1);
  return r;
}

/// Uniform pick over the table (mask ids 1..7 for the default table).
inline int choose_mask(std::mt19937_64& rng, const MaskTable& table = default_mask_table()) {
  std::uniform_int_distribution<std::size_t> d(0, table.size() - 1);
  return table[d(rng)].mask_id;
}

inline const OcclusionMask& find_mask(const MaskTable& table, int mask_id) {
  for (const auto& m : table)
    if (m.mask_id == mask_id) return m;
  throw ValidationError("unknown mask_id " + std::to_string(mask_id));
}

/// Replaces the pixels of a C x H x W patch whose centers fall inside the
/// jittered mask with i.i.d. U[lo, hi] noise. Returns the rectangle used.
inline NormRect apply_input_dropout(Tensor& patch, int mask_id, std::mt19937_64& rng,
                                    const MaskTable& table = default_mask_table(), double lo = 0.0,
                                    double hi = 1.0) {
  if (patch.rank() != 3) throw ShapeMismatch("input dropout expects C x H x W, got " + shape_str(patch.shape()));
  const NormRect r = jitter_rect(find_mask(table, mask_id), rng);
  if (r.x1 <= r.x0 || r.y1 <= r.y0) return r;
  const std::size_t C = patch.dim(0), H = patch.dim(1), W = patch.dim(2);
  std::uniform_real_distribution<double> noise(lo, hi);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i) {
      const double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(H);
      if (cy < r.y0 || cy >= r.y1) continue;
      for (std::size_t j = 0; j < W; ++j) {
        const double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(W);
        if (cx < r.x0 || cx >= r.x1) continue;
        patch[(c * H + i) * W + j] = noise(rng);
      }
    }
  return r;
}

/// Picks a mask uniformly and applies it, regardless of the sample's label.
inline int random_input_dropout(Tensor& patch, std::mt19937_64& rng, const MaskTable& table = default_mask_table()) {
  const int id = choose_mask(rng, table);
  apply_input_dropout(patch, id, rng, table);
  return id;
}

struct SamplerConfig {
  std::size_t batch_size = 64;
  double r = 0.33;
  std::uint64_t seed = 0;
};

/// round(r * batch), at least 1 and at most batch.
inline std::size_t positives_per_batch(const SamplerConfig& cfg) {
  if (cfg.batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(cfg.r > 0 && cfg.r <= 1)) throw ValidationError("positive ratio r must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::llround(cfg.r * static_cast<double>(cfg.batch_size)));
  return std::clamp<std::size_t>(n, 1, cfg.batch_size);
}

/// Ratio-controlled mini-batch sampler over a labeled index set. Negatives
/// are drawn without replacement from a shuffled pool and an epoch ends when
/// the pool is exhausted; positives cycle through their own reshuffled pool.
class MinibatchSampler {
 public:
  MinibatchSampler(const std::vector<int>& labels, SamplerConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos_ : neg_).push_back(i);
    n_pos_ = mvdet::positives_per_batch(cfg_);
    if (pos_.empty()) throw InsufficientPositives("dataset has no positive samples");
    if (neg_.empty() && n_pos_ < cfg_.batch_size) throw InsufficientData("dataset has no negative samples");
    std::shuffle(pos_.begin(), pos_.end(), rng_);
    std::shuffle(neg_.begin(), neg_.end(), rng_);
  }

  std::size_t positives_per_batch() const { return n_pos_; }
  std::size_t negatives_per_batch() const { return cfg_.batch_size - n_pos_; }
  std::size_t epoch() const { return epoch_; }
  /// Batches needed to consume the negative pool once.
  std::size_t batches_per_epoch() const {
    const std::size_t n = negatives_per_batch();
    return n == 0 ? (pos_.size() + n_pos_ - 1) / n_pos_ : (neg_.size() + n - 1) / n;
  }

  /// Sample indices of the next batch, shuffled.
  std::vector<std::size_t> next() {
    std::vector<std::size_t> batch;
    batch.reserve(cfg_.batch_size);
    for (std::size_t k = 0; k < n_pos_; ++k) {
      if (pos_next_ == pos_.size()) {
        std::shuffle(pos_.begin(), pos_.end(), rng_);
        pos_next_ = 0;
      }
      batch.push_back(pos_[pos_next_++]);
    }
    for (std::size_t k = 0; k < negatives_per_batch(); ++k) {
      batch.push_back(neg_[neg_next_++]);
      if (neg_next_ == neg_.size()) {
        std::shuffle(neg_.begin(), neg_.end(), rng_);
        neg_next_ = 0;
        ++epoch_;
      }
    }
    if (negatives_per_batch() == 0 && pos_next_ == pos_.size()) ++epoch_;
    std::shuffle(batch.begin(), batch.end(), rng_);
    return batch;
  }

 private:
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> pos_, neg_;
  std::size_t n_pos_ = 1;
  std::size_t pos_next_ = 0, neg_next_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace mvdet
