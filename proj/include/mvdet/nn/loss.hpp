#pragma once

#include <cmath>
#include <span>

#include "mvdet/nn/network.hpp"

namespace mvdet::nn {

struct LossResult {
  double loss = 0;
  Tensor grad;  // dL/d log_probs
};

/// Negative log-likelihood of `labels` under row-wise log-probabilities,
/// averaged over the batch.
inline LossResult nll_loss(const Tensor& log_probs, std::span<const int> labels) {
  if (log_probs.rank() != 2 || log_probs.dim(0) != labels.size())
    throw ShapeMismatch("nll_loss: log_probs " + shape_str(log_probs.shape()) + " vs " +
                        std::to_string(labels.size()) + " labels");
  const std::size_t batch = log_probs.dim(0), k = log_probs.dim(1);
  LossResult r{0.0, Tensor(log_probs.shape())};
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw LabelOutOfRange("label " + std::to_string(y) + " with " + std::to_string(k) + " classes");
    r.loss -= log_probs[b * k + static_cast<std::size_t>(y)];
    r.grad[b * k + static_cast<std::size_t>(y)] = -inv;
  }
  r.loss *= inv;
  return r;
}

/// weight * ||w||_p over every Conv/Linear weight (biases excluded), treating
/// all weights as one vector. When `accumulate_grad` is set the (sub)gradient
/// is added to Param::grad; the subgradient at 0 is 0.
inline double pnorm_penalty(Network& net, int p, double weight, bool accumulate_grad = true) {
  if (p != 1 && p != 2) throw ValidationError("pnorm_penalty: p must be 1 or 2");
  if (weight < 0) throw ValidationError("pnorm_penalty: negative weight");
  double acc = 0;
  for (Param* prm : net.parameters()) {
    if (!prm->is_weight) continue;
    for (double w : prm->value.values()) acc += p == 1 ? std::abs(w) : w * w;
  }
  const double norm = p == 1 ? acc : std::sqrt(acc);
  if (accumulate_grad && weight != 0.0 && norm > 0.0) {
    for (Param* prm : net.parameters()) {
      if (!prm->is_weight) continue;
      for (std::size_t i = 0; i < prm->value.size(); ++i) {
        const double w = prm->value[i];
        const double g = p == 1 ? (w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0)) : w / norm;
        prm->grad[i] += weight * g;
      }
    }
  }
  return weight * norm;
}

}  // namespace mvdet::nn
