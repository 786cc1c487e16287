#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "simpleir/data/manifest.hpp"
#include "simpleir/model/network.hpp"
#include "simpleir/objective/loss.hpp"
#include "simpleir/objective/metrics.hpp"

namespace simpleir {

struct TileConfig {
  std::size_t tile = 256;    ///< images with both sides <= tile run in one pass; 0 disables tiling
  std::size_t overlap = 16;

  void validate(std::size_t down_factor) const {
    if (tile == 0) return;
    if (tile <= overlap) throw ConfigError("tile size must exceed the overlap");
    if (tile % down_factor != 0 || overlap % down_factor != 0) {
      throw ConfigError("tile size and overlap must be multiples of " + std::to_string(down_factor));
    }
  }
};

namespace detail {

/// Tile origins along one axis: multiples of (tile - overlap) until the axis is covered.
inline std::vector<std::size_t> tile_starts(std::size_t extent, std::size_t tile, std::size_t overlap) {
  std::vector<std::size_t> starts{0};
  while (starts.back() + tile < extent) starts.push_back(starts.back() + tile - overlap);
  return starts;
}

/// Linear ramp over the overlap on sides shared with a neighbouring tile, 1 elsewhere.
inline double blend_weight(std::size_t i, std::size_t len, bool ramp_lo, bool ramp_hi, std::size_t overlap) {
  double w = 1.0;
  const double steps = static_cast<double>(overlap + 1);
  if (ramp_lo) w = std::min(w, static_cast<double>(i + 1) / steps);
  if (ramp_hi) w = std::min(w, static_cast<double>(len - i) / steps);
  return w;
}

}  // namespace detail

/// Restores an image in overlapping tiles with linear blending when it exceeds the tile budget.
inline Tensor restore_tiled(const Tensor& image, const ParameterSet& params, const ModelConfig& cfg,
                            const TileConfig& tiles = {}) {
  tiles.validate(cfg.down_factor);
  const Shape s = image.shape();
  if (tiles.tile == 0 || (s.h <= tiles.tile && s.w <= tiles.tile)) return restore(image, params, cfg);
  const auto ys = detail::tile_starts(s.h, tiles.tile, tiles.overlap);
  const auto xs = detail::tile_starts(s.w, tiles.tile, tiles.overlap);
  Tensor acc(s), weight({1, 1, s.h, s.w});
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
      const std::size_t y0 = ys[yi], x0 = xs[xi];
      const std::size_t th = std::min(tiles.tile, s.h - y0);
      const std::size_t tw = std::min(tiles.tile, s.w - x0);
      const Tensor out = restore(ops::crop2d(image, y0, x0, th, tw), params, cfg);
      for (std::size_t y = 0; y < th; ++y) {
        const double wy = detail::blend_weight(y, th, yi > 0, yi + 1 < ys.size(), tiles.overlap);
        for (std::size_t x = 0; x < tw; ++x) {
          const double w = wy * detail::blend_weight(x, tw, xi > 0, xi + 1 < xs.size(), tiles.overlap);
          weight.at(0, 0, y0 + y, x0 + x) += w;
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t c = 0; c < s.c; ++c) acc.at(n, c, y0 + y, x0 + x) += w * out.at(n, c, y, x);
        }
      }
    }
  }
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) acc.at(n, c, y, x) /= weight.at(0, 0, y, x);
  return acc;
}

/// Per-sample PSNR / SSIM / loss averaged over one split of one dataset.
inline MetricReport evaluate(const ParameterSet& params, const ModelConfig& cfg, const Manifest& manifest,
                             const std::string& dataset, const std::string& split = "test",
                             const LossConfig& loss = {}, const TileConfig& tiles = {}) {
  const auto& records = manifest.find(dataset).split(split);
  if (records.empty()) throw DataError("evaluate: split '" + split + "' of '" + dataset + "' is empty");
  std::vector<MetricReport> samples;
  for (const SampleRecord& r : records) {
    const SamplePair pair = load_pair(manifest, r);
    const Tensor restored = restore_tiled(pair.degraded, params, cfg, tiles);
    require_finite(restored, "evaluate");
    samples.push_back({psnr({restored, pair.reference}), ssim({restored, pair.reference}),
                       restoration_loss_value(restored, pair.reference, loss), 1});
  }
  return aggregate(samples);
}

}  // namespace simpleir
