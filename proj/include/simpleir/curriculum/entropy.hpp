#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "simpleir/data/image.hpp"

namespace simpleir {

/// 8-bit BT.601 luma: round(0.299 R + 0.587 G + 0.114 B) over 8-bit channel levels.
inline std::uint8_t luma8(const ImageBuffer& img, std::size_t y, std::size_t x) {
  if (img.channels == 1) return quantize8(img.at(y, x, 0));
  const double r = quantize8(img.at(y, x, 0));
  const double g = quantize8(img.at(y, x, 1));
  const double b = quantize8(img.at(y, x, 2));
  return static_cast<std::uint8_t>(std::clamp(std::lround(0.299 * r + 0.587 * g + 0.114 * b), 0L, 255L));
}

inline std::array<std::size_t, 256> luma_histogram(const ImageBuffer& img) {
  std::array<std::size_t, 256> hist{};
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) ++hist[luma8(img, y, x)];
  return hist;
}

/// Shannon entropy of the 256-bin luma histogram, in bits (0..8).
inline double image_entropy(const ImageBuffer& img) {
  if (img.h == 0 || img.w == 0 || img.values.empty()) throw DimensionError("image_entropy: empty image");
  const auto hist = luma_histogram(img);
  const double total = static_cast<double>(img.h * img.w);
  double bits = 0.0;
  for (std::size_t count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    bits -= p * std::log2(p);
  }
  return bits == 0.0 ? 0.0 : bits;  // avoid -0
}

/// |H(clean) - H(degraded)|.
inline double entropy_difference(const ImageBuffer& clean, const ImageBuffer& degraded) {
  return std::abs(image_entropy(clean) - image_entropy(degraded));
}

}  // namespace simpleir
