#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvdet/errors.hpp"
#include "mvdet/nn/kernels.hpp"
#include "mvdet/tensor.hpp"

namespace mvdet::nn {

enum class Mode { eval, train };

struct Conv2dSpec {
  std::size_t in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 0;
  bool operator==(const Conv2dSpec&) const = default;
};
struct ReLUSpec {
  bool operator==(const ReLUSpec&) const = default;
};
struct MaxPoolSpec {
  std::size_t k = 2, stride = 2;
  bool operator==(const MaxPoolSpec&) const = default;
};
struct LinearSpec {
  std::size_t in = 0, out = 0;
  bool operator==(const LinearSpec&) const = default;
};
struct FlattenSpec {
  bool operator==(const FlattenSpec&) const = default;
};
struct LogSoftmaxSpec {
  bool operator==(const LogSoftmaxSpec&) const = default;
};
struct DropoutSpec {
  double rate = 0.5;
  bool operator==(const DropoutSpec&) const = default;
};

using LayerSpec = std::variant<Conv2dSpec, ReLUSpec, MaxPoolSpec, LinearSpec, FlattenSpec,
                               LogSoftmaxSpec, DropoutSpec>;

inline std::string kind_name(const LayerSpec& spec) {
  static constexpr const char* names[] = {"Conv2d",  "ReLU",       "MaxPool", "Linear",
                                          "Flatten", "LogSoftmax", "Dropout"};
  return names[spec.index()];
}

/// A trainable tensor with its accumulated gradient. `is_weight` marks the
/// tensors that regularization applies to (biases are excluded).
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool is_weight = true;
};

/// One stage of a straight layer pipeline. Inputs carry a leading batch
/// dimension. `forward` is the read-only evaluation path; `forward_train`
/// records what `backward` needs.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerSpec spec() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual Tensor forward_train(const Tensor& x) = 0;
  /// Accumulates parameter gradients and returns dL/dx (empty when
  /// `need_input_grad` is false).
  virtual Tensor backward(const Tensor& grad_out, bool need_input_grad) = 0;
  virtual std::span<Param> params() { return {}; }
  virtual std::span<const Param> params() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual void initialize(std::mt19937_64& /*rng*/) {}
  void clear_record() { recorded_ = false; }

 protected:
  void require_record() const {
    if (!recorded_)
      throw NoRecordedForward(kind_name(spec()) + " backward called without a training forward");
  }
  bool recorded_ = false;
};

namespace detail {

inline void expect_rank(const Shape& in, std::size_t rank, const char* who) {
  if (in.size() != rank)
    throw ShapeMismatch(std::string(who) + " expects rank " + std::to_string(rank) +
                        " input, got " + shape_str(in));
}

inline void fan_in_uniform(Tensor& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.values()) v = dist(rng);
}

}  // namespace detail

class Conv2d final : public Layer {
 public:
  explicit Conv2d(const Conv2dSpec& s) : s_(s) {
    if (s.in_ch == 0 || s.out_ch == 0 || s.k == 0 || s.stride == 0)
      throw ShapeMismatch("Conv2d with zero-sized hyperparameter");
    const std::size_t ckk = s.in_ch * s.k * s.k;
    params_[0] = {"weight", Tensor({s.out_ch, ckk}), Tensor({s.out_ch, ckk}), true};
    params_[1] = {"bias", Tensor({s.out_ch}), Tensor({s.out_ch}), false};
  }

  LayerSpec spec() const override { return s_; }

  Shape output_shape(const Shape& in) const override {
    detail::expect_rank(in, 4, "Conv2d");
    if (in[1] != s_.in_ch)
      throw ShapeMismatch("Conv2d expects " + std::to_string(s_.in_ch) + " channels, got " +
                          shape_str(in));
    if (in[2] + 2 * s_.pad < s_.k || in[3] + 2 * s_.pad < s_.k)
      throw ShapeMismatch("Conv2d kernel larger than padded input " + shape_str(in));
    return {in[0], s_.out_ch, (in[2] + 2 * s_.pad - s_.k) / s_.stride + 1,
            (in[3] + 2 * s_.pad - s_.k) / s_.stride + 1};
  }

  Tensor forward(const Tensor& x) const override { return run(x); }

  Tensor forward_train(const Tensor& x) override {
    Tensor y = run(x);
    input_ = x;
    recorded_ = true;
    return y;
  }

  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    const Shape& in_shape = input_.shape();
    const Shape out = output_shape(in_shape);
    if (gy.shape() != out) throw ShapeMismatch("Conv2d backward gradient shape " + shape_str(gy.shape()));
    const std::size_t batch = out[0], ohw = out[2] * out[3], ckk = s_.in_ch * s_.k * s_.k;
    const std::size_t in_hw = in_shape[2] * in_shape[3];
    const double* w = params_[0].value.data();
    double* gw = params_[0].grad.data();
    double* gb = params_[1].grad.data();
    Tensor gx;
    std::vector<double> gcol, col(ckk * ohw);
    if (need_input_grad) {
      gx = Tensor(in_shape);
      gcol.resize(ckk * ohw);
    }
    for (std::size_t n = 0; n < batch; ++n) {
      const double* g = gy.data() + n * s_.out_ch * ohw;
      im2col(input_.data() + n * s_.in_ch * in_hw, col.data(), in_shape[2], in_shape[3], out[2], out[3]);
      kernels::gemm_nt(s_.out_ch, ckk, ohw, g, col.data(), gw);
      for (std::size_t o = 0; o < s_.out_ch; ++o) {
        double acc = 0;
        for (std::size_t i = 0; i < ohw; ++i) acc += g[o * ohw + i];
        gb[o] += acc;
      }
      if (need_input_grad) {
        std::fill(gcol.begin(), gcol.end(), 0.0);
        kernels::gemm_tn(ckk, ohw, s_.out_ch, w, g, gcol.data());
        col2im(gcol.data(), gx.data() + n * s_.in_ch * in_hw, in_shape[2], in_shape[3], out[2], out[3]);
      }
    }
    return gx;
  }

  std::span<Param> params() override { return params_; }
  std::span<const Param> params() const override { return params_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  void initialize(std::mt19937_64& rng) override {
    detail::fan_in_uniform(params_[0].value, s_.in_ch * s_.k * s_.k, rng);
    params_[1].value.fill(0.0);
  }

 private:
  Tensor run(const Tensor& x) const {
    const Shape out = output_shape(x.shape());
    const std::size_t batch = out[0], h = x.dim(2), w = x.dim(3);
    const std::size_t ohw = out[2] * out[3], ckk = s_.in_ch * s_.k * s_.k;
    std::vector<double> cols(ckk * ohw);
    double* col = cols.data();
    Tensor y(out);
    const double* wt = params_[0].value.data();
    const double* b = params_[1].value.data();
    for (std::size_t n = 0; n < batch; ++n) {
      im2col(x.data() + n * s_.in_ch * h * w, col, h, w, out[2], out[3]);
      double* yn = y.data() + n * s_.out_ch * ohw;
      for (std::size_t o = 0; o < s_.out_ch; ++o)
        std::fill(yn + o * ohw, yn + (o + 1) * ohw, b[o]);
      kernels::gemm_nn(s_.out_ch, ohw, ckk, wt, col, yn);
    }
    return y;
  }

  void im2col(const double* img, double* col, std::size_t h, std::size_t w, std::size_t oh,
              std::size_t ow) const {
    const auto pad = static_cast<std::ptrdiff_t>(s_.pad);
    for (std::size_t c = 0; c < s_.in_ch; ++c)
      for (std::size_t ky = 0; ky < s_.k; ++ky)
        for (std::size_t kx = 0; kx < s_.k; ++kx) {
          double* row = col + ((c * s_.k + ky) * s_.k + kx) * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * s_.stride + ky) - pad;
            double* dst = row + oy * ow;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
              std::fill(dst, dst + ow, 0.0);
              continue;
            }
            const double* src = img + (c * h + static_cast<std::size_t>(iy)) * w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * s_.stride + kx) - pad;
              dst[ox] = ix >= 0 && ix < static_cast<std::ptrdiff_t>(w) ? src[ix] : 0.0;
            }
          }
        }
  }

  void col2im(const double* col, double* img, std::size_t h, std::size_t w, std::size_t oh,
              std::size_t ow) const {
    const auto pad = static_cast<std::ptrdiff_t>(s_.pad);
    for (std::size_t c = 0; c < s_.in_ch; ++c)
      for (std::size_t ky = 0; ky < s_.k; ++ky)
        for (std::size_t kx = 0; kx < s_.k; ++kx) {
          const double* row = col + ((c * s_.k + ky) * s_.k + kx) * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * s_.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            double* dst = img + (c * h + static_cast<std::size_t>(iy)) * w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * s_.stride + kx) - pad;
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += row[oy * ow + ox];
            }
          }
        }
  }

  Conv2dSpec s_;
  Param params_[2];
  Tensor input_;
};

class ReLU final : public Layer {
 public:
  LayerSpec spec() const override { return ReLUSpec{}; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) const override {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
  }
  Tensor forward_train(const Tensor& x) override {
    input_ = x;
    recorded_ = true;
    return forward(x);
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    if (gy.shape() != input_.shape()) throw ShapeMismatch("ReLU backward gradient shape");
    if (!need_input_grad) return {};
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(input_[i] > 0.0)) gx[i] = 0.0;
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor input_;
};

class MaxPool final : public Layer {
 public:
  explicit MaxPool(const MaxPoolSpec& s) : s_(s) {
    if (s.k == 0 || s.stride == 0) throw ShapeMismatch("MaxPool with zero-sized hyperparameter");
  }
  LayerSpec spec() const override { return s_; }
  Shape output_shape(const Shape& in) const override {
    detail::expect_rank(in, 4, "MaxPool");
    if (in[2] < s_.k || in[3] < s_.k) throw ShapeMismatch("MaxPool window larger than input " + shape_str(in));
    return {in[0], in[1], (in[2] - s_.k) / s_.stride + 1, (in[3] - s_.k) / s_.stride + 1};
  }
  Tensor forward(const Tensor& x) const override {
    std::vector<std::size_t> arg;
    return run(x, arg);
  }
  Tensor forward_train(const Tensor& x) override {
    in_shape_ = x.shape();
    recorded_ = true;
    return run(x, argmax_);
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    if (gy.size() != argmax_.size()) throw ShapeMismatch("MaxPool backward gradient shape");
    if (!need_input_grad) return {};
    Tensor gx(in_shape_);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax_[i]] += gy[i];
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }

 private:
  Tensor run(const Tensor& x, std::vector<std::size_t>& arg) const {
    const Shape out = output_shape(x.shape());
    const std::size_t h = x.dim(2), w = x.dim(3);
    Tensor y(out);
    arg.resize(y.size());
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < out[0] * out[1]; ++plane) {
      const std::size_t base = plane * h * w;
      for (std::size_t oy = 0; oy < out[2]; ++oy)
        for (std::size_t ox = 0; ox < out[3]; ++ox, ++o) {
          std::size_t best = base + (oy * s_.stride) * w + ox * s_.stride;
          for (std::size_t ky = 0; ky < s_.k; ++ky)
            for (std::size_t kx = 0; kx < s_.k; ++kx) {
              const std::size_t idx = base + (oy * s_.stride + ky) * w + ox * s_.stride + kx;
              if (x[idx] > x[best]) best = idx;
            }
          y[o] = x[best];
          arg[o] = best;
        }
    }
    return y;
  }

  MaxPoolSpec s_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

class Linear final : public Layer {
 public:
  explicit Linear(const LinearSpec& s) : s_(s) {
    if (s.in == 0 || s.out == 0) throw ShapeMismatch("Linear with zero features");
    params_[0] = {"weight", Tensor({s.out, s.in}), Tensor({s.out, s.in}), true};
    params_[1] = {"bias", Tensor({s.out}), Tensor({s.out}), false};
  }
  LayerSpec spec() const override { return s_; }
  Shape output_shape(const Shape& in) const override {
    detail::expect_rank(in, 2, "Linear");
    if (in[1] != s_.in)
      throw ShapeMismatch("Linear expects " + std::to_string(s_.in) + " features, got " + shape_str(in));
    return {in[0], s_.out};
  }
  Tensor forward(const Tensor& x) const override {
    const Shape out = output_shape(x.shape());
    Tensor y(out);
    for (std::size_t b = 0; b < out[0]; ++b)
      std::copy(params_[1].value.data(), params_[1].value.data() + s_.out, y.data() + b * s_.out);
    kernels::gemm_nt(out[0], s_.out, s_.in, x.data(), params_[0].value.data(), y.data());
    return y;
  }
  Tensor forward_train(const Tensor& x) override {
    Tensor y = forward(x);
    input_ = x;
    recorded_ = true;
    return y;
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    const std::size_t batch = input_.dim(0);
    if (gy.shape() != Shape{batch, s_.out}) throw ShapeMismatch("Linear backward gradient shape");
    kernels::gemm_tn(s_.out, s_.in, batch, gy.data(), input_.data(), params_[0].grad.data());
    double* gb = params_[1].grad.data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < s_.out; ++o) gb[o] += gy[b * s_.out + o];
    if (!need_input_grad) return {};
    Tensor gx(input_.shape());
    kernels::gemm_nn(batch, s_.in, s_.out, gy.data(), params_[0].value.data(), gx.data());
    return gx;
  }
  std::span<Param> params() override { return params_; }
  std::span<const Param> params() const override { return params_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  void initialize(std::mt19937_64& rng) override {
    detail::fan_in_uniform(params_[0].value, s_.in, rng);
    params_[1].value.fill(0.0);
  }

 private:
  LinearSpec s_;
  Param params_[2];
  Tensor input_;
};

class Flatten final : public Layer {
 public:
  LayerSpec spec() const override { return FlattenSpec{}; }
  Shape output_shape(const Shape& in) const override {
    if (in.size() < 2) throw ShapeMismatch("Flatten expects a batch dimension, got " + shape_str(in));
    return {in[0], shape_size(in) / in[0]};
  }
  Tensor forward(const Tensor& x) const override { return x.reshaped(output_shape(x.shape())); }
  Tensor forward_train(const Tensor& x) override {
    in_shape_ = x.shape();
    recorded_ = true;
    return forward(x);
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    if (!need_input_grad) return {};
    return gy.reshaped(in_shape_);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape in_shape_;
};

/// Row-wise log-softmax over the last dimension of a B x K input.
class LogSoftmax final : public Layer {
 public:
  LayerSpec spec() const override { return LogSoftmaxSpec{}; }
  Shape output_shape(const Shape& in) const override {
    detail::expect_rank(in, 2, "LogSoftmax");
    return in;
  }
  Tensor forward(const Tensor& x) const override {
    const Shape s = output_shape(x.shape());
    Tensor y = x;
    const std::size_t k = s[1];
    for (std::size_t b = 0; b < s[0]; ++b) {
      double* r = y.data() + b * k;
      double mx = r[0];
      for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, r[i]);
      double sum = 0;
      for (std::size_t i = 0; i < k; ++i) sum += std::exp(r[i] - mx);
      const double lse = mx + std::log(sum);
      for (std::size_t i = 0; i < k; ++i) r[i] -= lse;
    }
    return y;
  }
  Tensor forward_train(const Tensor& x) override {
    output_ = forward(x);
    recorded_ = true;
    return output_;
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    if (gy.shape() != output_.shape()) throw ShapeMismatch("LogSoftmax backward gradient shape");
    if (!need_input_grad) return {};
    const std::size_t k = output_.dim(1);
    Tensor gx = gy;
    for (std::size_t b = 0; b < output_.dim(0); ++b) {
      double total = 0;
      for (std::size_t i = 0; i < k; ++i) total += gy[b * k + i];
      for (std::size_t i = 0; i < k; ++i)
        gx[b * k + i] = gy[b * k + i] - std::exp(output_[b * k + i]) * total;
    }
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LogSoftmax>(*this); }

 private:
  Tensor output_;
};

/// Inverted dropout: active only on the training path.
class Dropout final : public Layer {
 public:
  explicit Dropout(const DropoutSpec& s) : s_(s) {
    if (!(s.rate >= 0.0 && s.rate < 1.0)) throw ShapeMismatch("Dropout rate must lie in [0,1)");
  }
  LayerSpec spec() const override { return s_; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) const override { return x; }
  Tensor forward_train(const Tensor& x) override {
    std::bernoulli_distribution keep(1.0 - s_.rate);
    const double scale = 1.0 / (1.0 - s_.rate);
    mask_.assign(x.size(), 0.0);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      mask_[i] = keep(rng_) ? scale : 0.0;
      y[i] *= mask_[i];
    }
    recorded_ = true;
    return y;
  }
  Tensor backward(const Tensor& gy, bool need_input_grad) override {
    require_record();
    if (gy.size() != mask_.size()) throw ShapeMismatch("Dropout backward gradient shape");
    if (!need_input_grad) return {};
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask_[i];
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  void initialize(std::mt19937_64& rng) override { reseed(rng()); }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  DropoutSpec s_;
  std::mt19937_64 rng_{0};
  std::vector<double> mask_;
};

inline std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<Layer> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Conv2dSpec>) return std::make_unique<Conv2d>(s);
        else if constexpr (std::is_same_v<S, ReLUSpec>) return std::make_unique<ReLU>();
        else if constexpr (std::is_same_v<S, MaxPoolSpec>) return std::make_unique<MaxPool>(s);
        else if constexpr (std::is_same_v<S, LinearSpec>) return std::make_unique<Linear>(s);
        else if constexpr (std::is_same_v<S, FlattenSpec>) return std::make_unique<Flatten>();
        else if constexpr (std::is_same_v<S, LogSoftmaxSpec>) return std::make_unique<LogSoftmax>();
        else return std::make_unique<Dropout>(s);
      },
      spec);
}

}  // namespace mvdet::nn
