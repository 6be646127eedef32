#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <random>
#include <vector>

#include "mvdet/nn/layers.hpp"

namespace mvdet::nn {

/// A straight pipeline of layers with reverse-mode gradients.
class Network {
 public:
  Network() = default;

  /// Builds the layers and draws initial parameters from `seed`.
  Network(const std::vector<LayerSpec>& specs, std::uint64_t seed) : seed_(seed) {
    std::mt19937_64 rng(seed);
    for (const auto& s : specs) {
      layers_.push_back(make_layer(s));
      layers_.back()->initialize(rng);
    }
  }

  Network(const Network& o) : seed_(o.seed_) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& o) {
    if (this != &o) {
      Network tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
  }

  /// Shape propagation; throws ShapeMismatch at the first inconsistent layer.
  Shape output_shape(Shape in) const {
    for (const auto& l : layers_) in = l->output_shape(in);
    return in;
  }

  Tensor forward(const Tensor& x, Mode mode = Mode::eval) {
    if (mode == Mode::eval) return infer(x);
    Tensor h = x;
    for (auto& l : layers_) h = l->forward_train(h);
    recorded_ = true;
    return h;
  }

  /// Evaluation-mode forward; never touches parameters or recorded state.
  Tensor infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->forward(h);
    return h;
  }

  /// Back-propagates `loss_grad` (dL/d output of the last training forward),
  /// accumulating into each Param::grad. Returns dL/d input.
  Tensor backward(const Tensor& loss_grad, bool need_input_grad = true) {
    if (!recorded_) throw NoRecordedForward("network backward without a training forward");
    Tensor g = loss_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool need = need_input_grad || i > 0;
      g = layers_[i]->backward(g, need);
    }
    return g;
  }

  void zero_grad() {
    for (Param* p : parameters()) p->grad.fill(0.0);
  }

  std::vector<Param*> parameters() {
    std::vector<Param*> out;
    for (auto& l : layers_)
      for (auto& p : l->params()) out.push_back(&p);
    return out;
  }
  std::vector<const Param*> parameters() const {
    std::vector<const Param*> out;
    for (const auto& l : layers_)
      for (const auto& p : l->params()) out.push_back(&p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param* p : parameters()) n += p->value.size();
    return n;
  }

  /// Copy of the first `d` layers (weights included).
  Network truncated(std::size_t d) const {
    Network out;
    out.seed_ = seed_;
    for (std::size_t i = 0; i < d && i < layers_.size(); ++i) out.layers_.push_back(layers_[i]->clone());
    return out;
  }

  /// Appends layers (freshly initialized from `seed`) after the existing ones.
  void append(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& s : specs) {
      layers_.push_back(make_layer(s));
      layers_.back()->initialize(rng);
    }
  }

  /// Order-dependent hash of every parameter bit pattern.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const Param* p : parameters())
      for (double v : p->value.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = (h ^ bits) * 1099511628211ull;
      }
    return h;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t seed_ = 0;
  bool recorded_ = false;
};

/// Convolutional embedding used at desk scale: 3x32x32 input, 1024 outputs.
inline std::vector<LayerSpec> mini_embed_specs() {
  return {Conv2dSpec{3, 8, 3, 1, 1}, ReLUSpec{}, MaxPoolSpec{2, 2},
          Conv2dSpec{8, 16, 3, 1, 1}, ReLUSpec{}, MaxPoolSpec{2, 2}, FlattenSpec{}};
}

inline constexpr std::size_t kPatchSize = 32;
inline constexpr std::size_t kMiniEmbedFeatures = 1024;

/// MiniEmbed followed by the temporary two-way head used for monocular training.
inline std::vector<LayerSpec> mono_classifier_specs() {
  auto s = mini_embed_specs();
  s.push_back(LinearSpec{kMiniEmbedFeatures, 2});
  s.push_back(LogSoftmaxSpec{});
  return s;
}

/// Fully connected head: Linear/ReLU per hidden width, then Linear(.,2) + LogSoftmax.
inline std::vector<LayerSpec> head_specs(std::size_t in, const std::vector<std::size_t>& hidden) {
  std::vector<LayerSpec> s;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    s.push_back(LinearSpec{prev, h});
    s.push_back(ReLUSpec{});
    prev = h;
  }
  s.push_back(LinearSpec{prev, 2});
  s.push_back(LogSoftmaxSpec{});
  return s;
}

inline const std::vector<std::size_t> kDeskHeadHidden{128, 64};
inline const std::vector<std::size_t> kFullHeadHidden{1024, 512};

}  // namespace mvdet::nn
