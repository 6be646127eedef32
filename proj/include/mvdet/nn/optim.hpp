#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvdet/nn/layers.hpp"

namespace mvdet::nn {

struct Sgd {
  double lr = 0.01;
  double momentum = 0.0;
};
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};
struct Adadelta {
  double rho = 0.9, eps = 1e-6, lr = 1.0;
};
struct RmsProp {
  double lr = 1e-2, alpha = 0.99, eps = 1e-8;
};

using OptimizerAlgo = std::variant<Sgd, Adam, Adadelta, RmsProp>;

/// Per-parameter running buffers. `first` holds momentum / Adam m / Adadelta
/// E[g^2] / RMSProp mean square; `second` holds Adam v / Adadelta E[dx^2].
struct OptimizerState {
  std::vector<std::vector<double>> first, second;
  std::size_t steps = 0;

  static OptimizerState for_params(std::span<Param* const> params) {
    OptimizerState s;
    for (const Param* p : params) {
      s.first.emplace_back(p->value.size(), 0.0);
      s.second.emplace_back(p->value.size(), 0.0);
    }
    return s;
  }
};

inline void optimizer_step(OptimizerState& state, std::span<Param* const> params,
                           const OptimizerAlgo& algo) {
  if (state.first.size() != params.size() || state.second.size() != params.size())
    throw StateShapeMismatch("optimizer state has " + std::to_string(state.first.size()) +
                             " slots for " + std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.first[i].size() != params[i]->value.size() ||
        state.second[i].size() != params[i]->value.size())
      throw StateShapeMismatch("optimizer slot " + std::to_string(i) + " size mismatch");

  ++state.steps;
  const auto t = static_cast<double>(state.steps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i]->value.data();
    const double* g = params[i]->grad.data();
    double* a = state.first[i].data();
    double* b = state.second[i].data();
    const std::size_t n = params[i]->value.size();
    std::visit(
        [&](const auto& o) {
          using O = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<O, Sgd>) {
            for (std::size_t j = 0; j < n; ++j) {
              if (o.momentum != 0.0) {
                a[j] = o.momentum * a[j] + g[j];
                w[j] -= o.lr * a[j];
              } else {
                w[j] -= o.lr * g[j];
              }
            }
          } else if constexpr (std::is_same_v<O, Adam>) {
            const double c1 = 1.0 - std::pow(o.beta1, t), c2 = 1.0 - std::pow(o.beta2, t);
            for (std::size_t j = 0; j < n; ++j) {
              a[j] = o.beta1 * a[j] + (1.0 - o.beta1) * g[j];
              b[j] = o.beta2 * b[j] + (1.0 - o.beta2) * g[j] * g[j];
              w[j] -= o.lr * (a[j] / c1) / (std::sqrt(b[j] / c2) + o.eps);
            }
          } else if constexpr (std::is_same_v<O, Adadelta>) {
            for (std::size_t j = 0; j < n; ++j) {
              a[j] = o.rho * a[j] + (1.0 - o.rho) * g[j] * g[j];
              const double dx = -std::sqrt(b[j] + o.eps) / std::sqrt(a[j] + o.eps) * g[j];
              b[j] = o.rho * b[j] + (1.0 - o.rho) * dx * dx;
              w[j] += o.lr * dx;
            }
          } else {
            for (std::size_t j = 0; j < n; ++j) {
              a[j] = o.alpha * a[j] + (1.0 - o.alpha) * g[j] * g[j];
              w[j] -= o.lr * g[j] / (std::sqrt(a[j]) + o.eps);
            }
          }
        },
        algo);
  }
}

/// Owns the state for one parameter set.
class Optimizer {
 public:
  Optimizer(OptimizerAlgo algo, std::span<Param* const> params)
      : algo_(algo), state_(OptimizerState::for_params(params)) {}
  void step(std::span<Param* const> params) { optimizer_step(state_, params, algo_); }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerAlgo algo_;
  OptimizerState state_;
};

inline std::string algo_name(const OptimizerAlgo& a) {
  static constexpr const char* names[] = {"sgd", "adam", "adadelta", "rmsprop"};
  return names[a.index()];
}

}  // namespace mvdet::nn
