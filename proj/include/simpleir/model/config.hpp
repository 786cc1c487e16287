#pragma once

#include <cstddef>
#include <string>

#include "simpleir/numerics/errors.hpp"

namespace simpleir {

/// Hyper-parameters of the restoration network.
struct ModelConfig {
  std::size_t channels = 16;      ///< feature width C at 1/4 resolution
  std::size_t num_fibs = 4;       ///< stacked feature iteration blocks
  std::size_t square_kernel = 3;  ///< LDAM k_s
  std::size_t band_kernel = 11;   ///< LDAM k_b
  std::size_t fc_reduction = 4;   ///< bottleneck ratio of the channel-attention FC pair
  std::size_t down_factor = 4;    ///< sub-pixel down/up sampling factor

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  /// Desk-scale default used by tests and the CLI.
  static ModelConfig desk() { return {}; }

  /// Smallest useful network (gradient checks).
  static ModelConfig tiny() { return {8, 2, 3, 3, 4, 4}; }

  /// Width/depth closest to 4.6M learnable parameters; frozen output of
  /// search_parameter_budget(4'600'000).
  static ModelConfig paper() { return {80, 44, 3, 11, 4, 4}; }

  static ModelConfig preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "tiny") return tiny();
    if (name == "paper") return paper();
    throw ConfigError("unknown model preset '" + name + "' (expected desk, tiny or paper)");
  }

  void validate() const {
    if (channels == 0 || channels % 4 != 0) {
      throw ConfigError("channels must be a positive multiple of 4 (LDAM splits four ways), got " +
                        std::to_string(channels));
    }
    if (fc_reduction == 0 || channels % fc_reduction != 0) {
      throw ConfigError("fc_reduction " + std::to_string(fc_reduction) + " must divide channels " +
                        std::to_string(channels));
    }
    if (square_kernel == 0 || square_kernel % 2 == 0) {
      throw ConfigError("square_kernel must be odd, got " + std::to_string(square_kernel));
    }
    if (band_kernel == 0 || band_kernel % 2 == 0) {
      throw ConfigError("band_kernel must be odd, got " + std::to_string(band_kernel));
    }
    if (down_factor != 4) {
      throw ConfigError("down_factor is fixed at 4, got " + std::to_string(down_factor));
    }
  }

  std::size_t image_channels() const { return 3 * down_factor * down_factor; }
};

/// Closed-form learnable parameter count. Independent of the tensor declarations in
/// parameters.hpp; tests check the two agree.
inline std::size_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  const std::size_t q = c / 4;
  const std::size_t hidden = c / cfg.fc_reduction;
  const std::size_t s = cfg.image_channels();

  const std::size_t head = 9 * s * c + c;
  const std::size_t tail = 9 * c * s + s;

  const std::size_t norms = 2 * (2 * c);
  const std::size_t projections = 2 * ((c * c + c) + (9 * c + c));
  const std::size_t attention_fc = (hidden * c + hidden) + (c * hidden + c);
  const std::size_t dsa_out = c * c + c;
  const std::size_t ldam = q * (cfg.square_kernel * cfg.square_kernel + 1) + 2 * q * (cfg.band_kernel + 1);
  const std::size_t merge = 2 * c * c + c;
  const std::size_t ffn = (9 * c * c + c) + (c * c + c);
  const std::size_t per_fib = norms + projections + attention_fc + dsa_out + ldam + merge + ffn;

  return head + tail + cfg.num_fibs * per_fib;
}

/// Grid search over widths (multiples of 16 up to 256) and depths (1..64) for the
/// configuration whose parameter count is nearest `target`. Kernel sizes follow `base`.
inline ModelConfig search_parameter_budget(std::size_t target, ModelConfig base = ModelConfig::desk()) {
  ModelConfig best = base;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (std::size_t c = 16; c <= 256; c += 16) {
    for (std::size_t f = 1; f <= 64; ++f) {
      ModelConfig cfg = base;
      cfg.channels = c;
      cfg.num_fibs = f;
      const std::size_t n = param_count(cfg);
      const std::size_t gap = n > target ? n - target : target - n;
      if (gap < best_gap) {
        best_gap = gap;
        best = cfg;
      }
    }
  }
  return best;
}

}  // namespace simpleir
