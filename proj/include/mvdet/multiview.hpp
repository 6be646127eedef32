#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "mvdet/augment.hpp"
#include "mvdet/dataset.hpp"
#include "mvdet/features.hpp"
#include "mvdet/geometry.hpp"
#include "mvdet/nms.hpp"
#include "mvdet/nn/loss.hpp"
#include "mvdet/nn/network.hpp"
#include "mvdet/nn/optim.hpp"
#include "mvdet/rng.hpp"

namespace mvdet {

/// C per-view embeddings psi (copies of a truncated monocular network) feeding
/// one head phi over the concatenated C*Q features, in ascending camera order.
struct MultiViewModel {
  std::vector<nn::Network> embeddings;
  nn::Network head;
  std::size_t depth = 0;
  std::size_t feature_dim = 0;
  bool freeze_embeddings = true;
  Shape patch_shape{3, nn::kPatchSize, nn::kPatchSize};

  std::size_t views() const { return embeddings.size(); }
};

inline MultiViewModel build_multiview(const nn::Network& mono, std::size_t d, std::size_t C,
                                      const std::vector<std::size_t>& hidden = nn::kDeskHeadHidden,
                                      std::uint64_t seed = 0,
                                      Shape patch_shape = {3, nn::kPatchSize, nn::kPatchSize}) {
  if (d == 0 || d > mono.num_layers())
    throw DepthOutOfRange("depth " + std::to_string(d) + " outside [1, " + std::to_string(mono.num_layers()) + "]");
  if (C == 0) throw ValidationError("need at least one view");
  nn::Network psi = mono.truncated(d);
  Shape in{1};
  in.insert(in.end(), patch_shape.begin(), patch_shape.end());
  if (psi.output_shape(in).size() != 2) psi.append({nn::FlattenSpec{}}, 0);
  const std::size_t Q = psi.output_shape(in)[1];
  MultiViewModel m{{}, nn::Network(nn::head_specs(C * Q, hidden), seed), d, Q, true, std::move(patch_shape)};
  for (std::size_t c = 0; c < C; ++c) m.embeddings.push_back(psi);
  return m;
}

inline void check_patch(const MultiViewModel& m, const Tensor& p) {
  if (p.shape() != m.patch_shape)
    throw ShapeMismatch("patch " + shape_str(p.shape()) + ", model expects " + shape_str(m.patch_shape));
}

/// Stacks one view of several samples into N x 3 x H x W.
inline Tensor stack_view(const MultiViewModel& m, std::span<const MultiViewSample* const> samples, std::size_t c) {
  Shape s{samples.size()};
  s.insert(s.end(), m.patch_shape.begin(), m.patch_shape.end());
  Tensor batch(s);
  const std::size_t n = shape_size(m.patch_shape);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->patches.size() != m.views())
      throw ShapeMismatch("sample has " + std::to_string(samples[i]->patches.size()) + " views, model " +
                          std::to_string(m.views()));
    check_patch(m, samples[i]->patches[c]);
    std::copy_n(samples[i]->patches[c].data(), n, batch.data() + i * n);
  }
  return batch;
}

/// Concatenated embedding features, N x (C*Q).
inline Tensor multiview_features(const MultiViewModel& m, std::span<const MultiViewSample* const> samples) {
  const std::size_t C = m.views(), Q = m.feature_dim;
  Tensor f({samples.size(), C * Q});
  for (std::size_t c = 0; c < C; ++c) {
    const Tensor e = m.embeddings[c].infer(stack_view(m, samples, c));
    for (std::size_t i = 0; i < samples.size(); ++i) std::copy_n(e.data() + i * Q, Q, f.data() + i * C * Q + c * Q);
  }
  return f;
}

/// Positive-class probabilities from head log-probabilities.
inline std::vector<double> positive_probability(const Tensor& logp) {
  std::vector<double> q(logp.dim(0));
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::clamp(std::exp(logp[i * 2 + 1]), 0.0, 1.0);
  return q;
}

inline std::vector<double> predict_batch(const MultiViewModel& m, std::span<const MultiViewSample* const> samples) {
  return positive_probability(m.head.infer(multiview_features(m, samples)));
}

inline double predict_cell(const MultiViewModel& m, const MultiViewSample& s) {
  const MultiViewSample* p = &s;
  return predict_batch(m, std::span<const MultiViewSample* const>(&p, 1))[0];
}

/// Features of sample refs, cropped from `src` in chunks.
inline FeatureMatrix compute_features(const MultiViewModel& m, const std::vector<SampleRef>& refs,
                                      const FrameSource& src, const CropConfig& crop, std::size_t chunk = 128) {
  FeatureMatrix fm(refs.size(), m.views() * m.feature_dim);
  for (std::size_t s = 0; s < refs.size(); s += chunk) {
    const std::size_t e = std::min(refs.size(), s + chunk);
    std::vector<MultiViewSample> batch;
    for (std::size_t i = s; i < e; ++i) batch.push_back(materialize(refs[i], src, crop));
    std::vector<const MultiViewSample*> ptrs;
    for (const auto& b : batch) ptrs.push_back(&b);
    const Tensor f = multiview_features(m, ptrs);
    std::copy(f.values().begin(), f.values().end(), fm.data.begin() + static_cast<std::ptrdiff_t>(s * fm.cols));
  }
  return fm;
}

// ---------------------------------------------------------------------------
// training

struct TrainOptions {
  std::size_t batch_size = 64;
  double r = 0.33;
  std::uint64_t seed = 0;
  nn::OptimizerAlgo optimizer = nn::Adam{};
  std::size_t epochs = 60;
  std::size_t patience = 10;
  /// Validation-loss drops smaller than this still update the kept model
  /// but count toward patience.
  double min_delta = 0.0;
  double val_fraction = 0.15;
  bool input_dropout = true;
  MaskTable masks = default_mask_table();
  int pnorm = 2;
  double pnorm_weight = 0.0;
  std::size_t max_batches_per_epoch = 0;  // 0: one pass over the negatives
  std::size_t first_epoch = 1;            // numbering offset when resuming
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters were kept
  double best_val_loss = 0;
};

/// What the generic training loop needs from a model.
class Trainable {
 public:
  virtual ~Trainable() = default;
  /// Log-probabilities of a training batch (records state for backward).
  virtual Tensor forward_train(std::span<const std::size_t> idx, std::mt19937_64& rng) = 0;
  virtual void backward(const Tensor& grad) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  /// Penalty added to the loss; accumulates its gradient.
  virtual double penalty(int, double) { return 0.0; }
  virtual Tensor infer(std::span<const std::size_t> idx) const = 0;
  virtual void save_best() = 0;
  virtual void restore_best() = 0;
};

/// Frame-grouped validation split: whole groups go to validation.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_group(const std::vector<int>& groups,
                                                                                    double val_fraction,
                                                                                    std::uint64_t seed) {
  std::vector<int> uniq(groups.begin(), groups.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::mt19937_64 rng(derive_seed(seed, {11}));
  std::shuffle(uniq.begin(), uniq.end(), rng);
  std::size_t n_val = uniq.size() >= 2 ? static_cast<std::size_t>(std::ceil(val_fraction * uniq.size())) : 0;
  n_val = std::min(n_val, uniq.size() - std::min<std::size_t>(uniq.size(), 1));
  const std::set<int> val(uniq.begin(), uniq.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < groups.size(); ++i) (val.count(groups[i]) ? va : tr).push_back(i);
  return {tr, va};
}

inline std::pair<double, double> evaluate_loss_accuracy(const Trainable& model, const std::vector<std::size_t>& idx,
                                                        const std::vector<int>& labels, std::size_t chunk = 256) {
  double loss = 0, correct = 0;
  for (std::size_t s = 0; s < idx.size(); s += chunk) {
    const std::size_t e = std::min(idx.size(), s + chunk);
    const Tensor logp = model.infer(std::span<const std::size_t>(idx.data() + s, e - s));
    for (std::size_t k = 0; k < e - s; ++k) {
      const int y = labels[idx[s + k]];
      loss -= logp[k * 2 + static_cast<std::size_t>(y)];
      correct += ((logp[k * 2 + 1] > logp[k * 2]) ? 1 : 0) == y;
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  return {loss / n, correct / n};
}

/// Mini-batch training with the ratio sampler and best-validation-loss
/// checkpoint selection with early stopping.
inline TrainReport fit(Trainable& model, const std::vector<int>& labels, const std::vector<int>& groups,
                       const TrainOptions& opt, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (labels.size() != groups.size()) throw DimensionMismatch("labels and groups differ in length");
  const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
  const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
  if (!has_pos || !has_neg) throw InsufficientData("training data needs both classes");
  for (int y : labels)
    if (y != 0 && y != 1) throw LabelOutOfRange("label " + std::to_string(y));

  auto [train_idx, val_idx] = split_by_group(groups, opt.val_fraction, opt.seed);
  std::vector<int> train_labels;
  for (auto i : train_idx) train_labels.push_back(labels[i]);
  const bool use_val = !val_idx.empty();

  TrainReport rep;
  rep.best_val_loss = use_val ? evaluate_loss_accuracy(model, val_idx, labels).first
                              : std::numeric_limits<double>::infinity();
  model.save_best();
  if (opt.epochs == 0) return rep;

  MinibatchSampler sampler(train_labels, {opt.batch_size, opt.r, derive_seed(opt.seed, {12})});
  std::mt19937_64 rng(derive_seed(opt.seed, {13}));
  auto params = model.params();
  nn::Optimizer optim(opt.optimizer, params);
  std::size_t bad = 0;
  std::vector<std::size_t> batch_idx;
  std::vector<int> batch_labels;
  for (std::size_t ep = 0; ep < opt.epochs; ++ep) {
    const std::size_t start_epoch = sampler.epoch();
    double loss_sum = 0;
    std::size_t n_batches = 0;
    while (sampler.epoch() == start_epoch &&
           (opt.max_batches_per_epoch == 0 || n_batches < opt.max_batches_per_epoch)) {
      const auto b = sampler.next();
      batch_idx.clear();
      batch_labels.clear();
      for (auto k : b) {
        batch_idx.push_back(train_idx[k]);
        batch_labels.push_back(labels[train_idx[k]]);
      }
      for (auto* p : params) p->grad.fill(0.0);
      const Tensor logp = model.forward_train(batch_idx, rng);
      auto l = nn::nll_loss(logp, batch_labels);
      model.backward(l.grad);
      if (opt.pnorm_weight > 0) l.loss += model.penalty(opt.pnorm, opt.pnorm_weight);
      optim.step(params);
      loss_sum += l.loss;
      ++n_batches;
    }
    EpochLog log{opt.first_epoch + ep, loss_sum / static_cast<double>(std::max<std::size_t>(n_batches, 1)), 0, 0};
    if (use_val) {
      std::tie(log.val_loss, log.val_accuracy) = evaluate_loss_accuracy(model, val_idx, labels);
    } else {
      log.val_loss = log.train_loss;
      log.val_accuracy = evaluate_loss_accuracy(model, train_idx, labels).second;
    }
    rep.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    const bool significant = log.val_loss < rep.best_val_loss - opt.min_delta;
    if (log.val_loss < rep.best_val_loss) {
      rep.best_val_loss = log.val_loss;
      rep.best_epoch = log.epoch;
      model.save_best();
    }
    if (significant) {
      bad = 0;
    } else if (++bad >= opt.patience) {
      break;
    }
  }
  model.restore_best();
  return rep;
}

/// Single-view patches addressed by index, produced on demand.
struct PatchSet {
  std::vector<int> labels;
  std::vector<int> groups;
  std::function<Tensor(std::size_t)> patch;
  std::size_t size() const { return labels.size(); }
};

inline PatchSet mono_patch_set(const std::vector<MonoRef>& refs, const FrameSource& src, const CropConfig& crop) {
  PatchSet ps;
  for (const auto& r : refs) {
    ps.labels.push_back(r.label);
    ps.groups.push_back(r.frame);
  }
  ps.patch = [&refs, &src, crop](std::size_t i) { return mono_patch(refs[i], src, crop); };
  return ps;
}

inline PatchSet tensor_patch_set(const std::vector<Tensor>& patches, std::vector<int> labels, std::vector<int> groups) {
  PatchSet ps{std::move(labels), std::move(groups), [&patches](std::size_t i) { return patches[i]; }};
  return ps;
}

class MonoTrainable : public Trainable {
 public:
  MonoTrainable(nn::Network& net, const PatchSet& data, const TrainOptions& opt)
      : net_(net), data_(data), opt_(opt), best_(net) {}

  Tensor forward_train(std::span<const std::size_t> idx, std::mt19937_64& rng) override {
    Tensor x = gather(idx, opt_.input_dropout ? &rng : nullptr);
    return net_.forward(x, nn::Mode::train);
  }
  void backward(const Tensor& g) override { net_.backward(g, false); }
  std::vector<nn::Param*> params() override { return net_.parameters(); }
  double penalty(int p, double w) override { return nn::pnorm_penalty(net_, p, w); }
  Tensor infer(std::span<const std::size_t> idx) const override { return net_.infer(gather(idx, nullptr)); }
  void save_best() override { best_ = net_; }
  void restore_best() override { net_ = best_; }

 private:
  Tensor gather(std::span<const std::size_t> idx, std::mt19937_64* rng) const {
    Tensor first = data_.patch(idx[0]);
    Shape s{idx.size()};
    s.insert(s.end(), first.shape().begin(), first.shape().end());
    Tensor x(s);
    const std::size_t n = first.size();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Tensor p = k == 0 ? std::move(first) : data_.patch(idx[k]);
      if (p.size() != n) throw ShapeMismatch("patches differ in shape");
      if (rng) random_input_dropout(p, *rng, opt_.masks);
      std::copy_n(p.data(), n, x.data() + k * n);
    }
    return x;
  }

  nn::Network& net_;
  const PatchSet& data_;
  const TrainOptions& opt_;
  nn::Network best_;
};

/// Trains a monocular classifier; input dropout is applied to every training
/// sample of both classes when enabled.
inline TrainReport train_monocular(nn::Network& net, const PatchSet& data, const TrainOptions& opt,
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
  MonoTrainable t(net, data, opt);
  return fit(t, data.labels, data.groups, opt, on_epoch);
}

/// A head trained on fixed feature rows.
class FeatureTrainable : public Trainable {
 public:
  FeatureTrainable(nn::Network& head, const FeatureMatrix& fm) : head_(head), fm_(fm), best_(head) {}
  Tensor forward_train(std::span<const std::size_t> idx, std::mt19937_64&) override {
    return head_.forward(fm_.gather(idx), nn::Mode::train);
  }
  void backward(const Tensor& g) override { head_.backward(g, false); }
  std::vector<nn::Param*> params() override { return head_.parameters(); }
  double penalty(int p, double w) override { return nn::pnorm_penalty(head_, p, w); }
  Tensor infer(std::span<const std::size_t> idx) const override { return head_.infer(fm_.gather(idx)); }
  void save_best() override { best_ = head_; }
  void restore_best() override { head_ = best_; }

 private:
  nn::Network& head_;
  const FeatureMatrix& fm_;
  nn::Network best_;
};

inline TrainReport train_on_features(nn::Network& head, const FeatureMatrix& fm, const std::vector<int>& labels,
                                     const std::vector<int>& groups, const TrainOptions& opt,
                                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (fm.rows != labels.size()) throw DimensionMismatch("feature rows and labels differ");
  FeatureTrainable t(head, fm);
  return fit(t, labels, groups, opt, on_epoch);
}

/// Embeddings and head trained jointly; each view's embedding gets its own
/// gradient.
class FullTrainable : public Trainable {
 public:
  FullTrainable(MultiViewModel& m, const std::vector<SampleRef>& refs, const FrameSource& src,
                const CropConfig& crop)
      : m_(m), refs_(refs), src_(src), crop_(crop), best_(m) {}

  Tensor forward_train(std::span<const std::size_t> idx, std::mt19937_64&) override {
    const auto samples = load(idx);
    std::vector<const MultiViewSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    const std::size_t C = m_.views(), Q = m_.feature_dim;
    Tensor f({idx.size(), C * Q});
    for (std::size_t c = 0; c < C; ++c) {
      const Tensor e = m_.embeddings[c].forward(stack_view(m_, ptrs, c), nn::Mode::train);
      for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(e.data() + i * Q, Q, f.data() + i * C * Q + c * Q);
    }
    return m_.head.forward(f, nn::Mode::train);
  }
  void backward(const Tensor& g) override {
    const Tensor gf = m_.head.backward(g, true);
    const std::size_t C = m_.views(), Q = m_.feature_dim, B = gf.dim(0);
    for (std::size_t c = 0; c < C; ++c) {
      Tensor ge({B, Q});
      for (std::size_t i = 0; i < B; ++i) std::copy_n(gf.data() + i * C * Q + c * Q, Q, ge.data() + i * Q);
      m_.embeddings[c].backward(ge, false);
    }
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    for (auto& e : m_.embeddings)
      for (auto* p : e.parameters()) ps.push_back(p);
    for (auto* p : m_.head.parameters()) ps.push_back(p);
    return ps;
  }
  double penalty(int p, double w) override { return nn::pnorm_penalty(m_.head, p, w); }
  Tensor infer(std::span<const std::size_t> idx) const override {
    const auto samples = load(idx);
    std::vector<const MultiViewSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    return m_.head.infer(multiview_features(m_, ptrs));
  }
  void save_best() override { best_ = m_; }
  void restore_best() override { m_ = best_; }

 private:
  std::vector<MultiViewSample> load(std::span<const std::size_t> idx) const {
    std::vector<MultiViewSample> out;
    for (auto i : idx) out.push_back(materialize(refs_[i], src_, crop_));
    return out;
  }

  MultiViewModel& m_;
  const std::vector<SampleRef>& refs_;
  const FrameSource& src_;
  CropConfig crop_;
  MultiViewModel best_;
};

/// Trains the head on frozen embeddings, or everything when
/// `model.freeze_embeddings` is false.
inline TrainReport train_head(MultiViewModel& model, const std::vector<SampleRef>& refs, const FrameSource& src,
                              const CropConfig& crop, const TrainOptions& opt,
                              const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (refs.empty()) throw InsufficientData("no multi-view samples");
  std::vector<int> labels, groups;
  for (const auto& r : refs) {
    labels.push_back(r.label);
    groups.push_back(r.frame);
  }
  if (model.freeze_embeddings) {
    const FeatureMatrix fm = compute_features(model, refs, src, crop);
    return train_on_features(model.head, fm, labels, groups, opt, on_epoch);
  }
  FullTrainable t(model, refs, src, crop);
  return fit(t, labels, groups, opt, on_epoch);
}

// ---------------------------------------------------------------------------
// detection

struct OccupancyMap {
  int frame_id = 0;
  std::vector<double> q;
};

struct FrameDetection {
  std::vector<DetectionCandidate> candidates;
  OccupancyMap map;
};

/// Per-view crop rectangles of every grid cell, G x C.
inline std::vector<std::vector<CropRect>> all_cell_rects(const std::vector<CameraCalibration>& cams,
                                                         const GroundGrid& grid, const CropConfig& crop) {
  std::vector<std::vector<CropRect>> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (int p = 0; p < grid.size(); ++p) out.push_back(cell_rects(cams, grid, p, crop.radius, crop.height));
  return out;
}

/// Embedding features of every cell of one frame, G x (C*Q).
inline FeatureMatrix frame_features(const MultiViewModel& m, const std::vector<Image>& images,
                                    const std::vector<std::vector<CropRect>>& rects, const CropConfig& crop) {
  const std::size_t G = rects.size(), C = m.views(), Q = m.feature_dim;
  if (images.size() != C) throw CalibrationMismatch("frame has " + std::to_string(images.size()) + " views");
  FeatureMatrix fm(G, C * Q);
  Shape s{G};
  s.insert(s.end(), m.patch_shape.begin(), m.patch_shape.end());
  const std::size_t n = shape_size(m.patch_shape);
  for (std::size_t c = 0; c < C; ++c) {
    Tensor batch(s);
    for (std::size_t p = 0; p < G; ++p) {
      const Tensor patch = crop_view(images[c], rects[p][c], crop);
      check_patch(m, patch);
      std::copy_n(patch.data(), n, batch.data() + p * n);
    }
    const Tensor e = m.embeddings[c].infer(batch);
    for (std::size_t p = 0; p < G; ++p)
      std::copy_n(e.data() + p * Q, Q, fm.data.data() + p * C * Q + c * Q);
  }
  return fm;
}

inline std::vector<double> head_scores(const nn::Network& head, const FeatureMatrix& fm, std::size_t chunk = 512) {
  std::vector<double> q;
  q.reserve(fm.rows);
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < fm.rows; s += chunk) {
    idx.clear();
    for (std::size_t i = s; i < std::min(fm.rows, s + chunk); ++i) idx.push_back(i);
    const auto part = positive_probability(head.infer(fm.gather(idx)));
    q.insert(q.end(), part.begin(), part.end());
  }
  return q;
}

/// Candidates are cells with q >= threshold, carrying their view rectangles.
inline std::vector<DetectionCandidate> threshold_candidates(int frame, const std::vector<double>& q,
                                                            const std::vector<std::vector<CropRect>>& rects,
                                                            double threshold) {
  std::vector<DetectionCandidate> out;
  for (std::size_t p = 0; p < q.size(); ++p)
    if (q[p] >= threshold) out.push_back({frame, static_cast<int>(p), q[p], rects[p]});
  return out;
}

inline FrameDetection detect_frame(const MultiViewModel& m, const std::vector<Image>& images, const GroundGrid& grid,
                                   const std::vector<CameraCalibration>& cams, const CropConfig& crop,
                                   double threshold, int frame_id = 0,
                                   const std::vector<std::vector<CropRect>>* rects = nullptr) {
  check_frame_matches(images, cams);
  if (cams.size() != m.views())
    throw CalibrationMismatch(std::to_string(cams.size()) + " cameras for a " + std::to_string(m.views()) +
                              "-view model");
  std::vector<std::vector<CropRect>> own;
  if (!rects) {
    own = all_cell_rects(cams, grid, crop);
    rects = &own;
  }
  FrameDetection out;
  out.map.frame_id = frame_id;
  out.map.q = head_scores(m.head, frame_features(m, images, *rects, crop));
  out.candidates = threshold_candidates(frame_id, out.map.q, *rects, threshold);
  return out;
}

// ---------------------------------------------------------------------------
// hard negatives

enum class HardNegativeMode { shift, mix };

inline constexpr double kShiftMin = 0.5;
inline constexpr double kShiftMax = 1.5;

/// Shift: moves the rectangles of 1 or 2 visible views of each positive
/// sideways by U[0.5, 1.5] rectangle widths. Mix: for each positive in a frame
/// with another positive, takes every view from one of the two, never all
/// from the same one. All outputs are negatives.
inline std::vector<SampleRef> generate_hard_negatives(const std::vector<SampleRef>& positives, HardNegativeMode mode,
                                                      std::mt19937_64& rng) {
  std::vector<SampleRef> out;
  if (mode == HardNegativeMode::shift) {
    std::uniform_real_distribution<double> mag(kShiftMin, kShiftMax);
    std::bernoulli_distribution sign(0.5);
    for (const auto& s : positives) {
      std::vector<std::size_t> vis;
      for (std::size_t c = 0; c < s.rects.size(); ++c)
        if (s.rects[c].visible) vis.push_back(c);
      if (vis.empty()) continue;
      const std::size_t k = std::min<std::size_t>(vis.size(), std::uniform_int_distribution<std::size_t>(1, 2)(rng));
      std::shuffle(vis.begin(), vis.end(), rng);
      SampleRef n = s;
      n.label = 0;
      n.provenance = Provenance::hard_shift;
      for (std::size_t j = 0; j < k; ++j) {
        CropRect& r = n.rects[vis[j]];
        const double dx = (sign(rng) ? 1.0 : -1.0) * mag(rng) * r.width();
        r = r.shifted(dx, 0);
      }
      out.push_back(std::move(n));
    }
    return out;
  }

  std::map<int, std::vector<const SampleRef*>> frames;
  for (const auto& s : positives) frames[s.frame].push_back(&s);
  bool any = false;
  for (const auto& s : positives) {
    const auto& same = frames[s.frame];
    std::vector<const SampleRef*> others;
    for (const auto* o : same)
      if (o->cell != s.cell) others.push_back(o);
    if (others.empty()) continue;
    const std::size_t C = s.rects.size();
    if (C < 2) throw ValidationError("mixing needs at least two views");
    any = true;
    const SampleRef* b = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    // bit c set: view c comes from b; all-zero and all-one patterns excluded
    const std::uint64_t full = (std::uint64_t{1} << C) - 1;
    const std::uint64_t pattern = std::uniform_int_distribution<std::uint64_t>(1, full - 1)(rng);
    SampleRef n = s;
    n.label = 0;
    n.provenance = Provenance::hard_mix;
    for (std::size_t c = 0; c < C; ++c)
      if (pattern >> c & 1) n.rects[c] = b->rects[c];
    out.push_back(std::move(n));
  }
  if (!any) throw NotEnoughPersons("no frame has positives of two distinct persons");
  return out;
}

}  // namespace mvdet
