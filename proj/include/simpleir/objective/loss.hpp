#pragma once

#include "simpleir/numerics/autodiff.hpp"

namespace simpleir {

struct LossConfig {
  double lambda = 0.1;  ///< weight of the frequency term

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("loss lambda must be a finite non-negative number");
    }
  }
};

/// mean|restored - reference| + lambda * mean over bins of |Re dF| + |Im dF|.
inline Var restoration_loss(const Var& restored, const Var& reference, const LossConfig& cfg = {}) {
  cfg.validate();
  const Var spatial = l1_mean(restored, reference);
  if (cfg.lambda == 0.0) return spatial;
  return add(spatial, scale(frequency_l1_mean(restored, reference), cfg.lambda));
}

/// Loss value without recording gradients.
inline double restoration_loss_value(const Tensor& restored, const Tensor& reference, const LossConfig& cfg = {}) {
  Graph g(false);
  return restoration_loss(g.constant(restored), g.constant(reference), cfg).value().item();
}

}  // namespace simpleir
