#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "simpleir/model/parameters.hpp"

namespace simpleir {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  /// Round parameters and moments to float32 after each step so a checkpoint holds the
  /// exact training state.
  bool storage_rounding = true;
};

/// First and second moments, shaped like the parameters they track.
struct OptimizerState {
  ParameterSet first;
  ParameterSet second;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const ParameterSet& params) {
    std::vector<NamedTensor> zeros;
    for (const NamedTensor& p : params) zeros.push_back({p.name, Tensor(p.value.shape())});
    return OptimizerState{ParameterSet(zeros), ParameterSet(zeros), 0};
  }

  bool operator==(const OptimizerState&) const = default;
};

/// Decoupled weight decay then the bias-corrected Adam update. Non-finite gradients are
/// rejected before anything is modified.
inline void adamw_step(ParameterSet& params, OptimizerState& state, const std::vector<Tensor>& grads, double lr,
                       const AdamWConfig& cfg = {}) {
  if (grads.size() != params.size() || state.first.size() != params.size() || state.second.size() != params.size()) {
    throw ContractError("adamw: gradient/moment count does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw DimensionError("adamw: gradient for '" + params[i].name + "' has shape " + grads[i].shape().str() +
                           ", parameter " + params[i].value.shape().str());
    }
    if (!all_finite(grads[i])) throw NumericError("adamw: non-finite gradient for '" + params[i].name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].value.data();
    auto m = state.first[i].value.data();
    auto v = state.second[i].value.data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] -= lr * cfg.weight_decay * theta[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
      if (cfg.storage_rounding) {
        theta[k] = static_cast<double>(static_cast<float>(theta[k]));
        m[k] = static_cast<double>(static_cast<float>(m[k]));
        v[k] = static_cast<double>(static_cast<float>(v[k]));
      }
    }
  }
}

}  // namespace simpleir
