#pragma once

// Seeded procedural textures and closed-form degradation models. Every generator is a pure
// function of its arguments; strength 0 returns the input unchanged.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "simpleir/data/image.hpp"
#include "simpleir/numerics/ops.hpp"
#include "simpleir/numerics/random.hpp"

namespace simpleir {

enum class DegradationKind { blur, lowlight, rain, snow };

inline const std::vector<DegradationKind>& all_degradations() {
  static const std::vector<DegradationKind> kinds{DegradationKind::blur, DegradationKind::lowlight,
                                                  DegradationKind::rain, DegradationKind::snow};
  return kinds;
}

inline std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::blur: return "blur";
    case DegradationKind::lowlight: return "lowlight";
    case DegradationKind::rain: return "rain";
    case DegradationKind::snow: return "snow";
  }
  return "?";
}

inline DegradationKind parse_degradation(const std::string& s) {
  for (DegradationKind k : all_degradations())
    if (to_string(k) == s) return k;
  throw ConfigError("unknown degradation kind '" + s + "' (blur, lowlight, rain, snow)");
}

/// Task tag used in manifests.
inline std::string task_tag(DegradationKind k) {
  switch (k) {
    case DegradationKind::blur: return "deblur";
    case DegradationKind::lowlight: return "llie";
    case DegradationKind::rain: return "derain";
    case DegradationKind::snow: return "desnow";
  }
  return "custom";
}

/// Default manifest strength per kind.
inline double default_strength(DegradationKind k) {
  switch (k) {
    case DegradationKind::blur: return 0.5;
    case DegradationKind::lowlight: return 0.8;
    case DegradationKind::rain: return 0.6;
    case DegradationKind::snow: return 0.6;
  }
  return 0.5;
}

// Model constants.
inline constexpr double kBlurSigmaMax = 3.0;      ///< sigma = strength * kBlurSigmaMax (px)
inline constexpr double kLowlightGammaMax = 2.5;  ///< gamma = 1 + strength * (kLowlightGammaMax - 1)
inline constexpr double kLowlightGainDrop = 0.7;  ///< gain = 1 - strength * kLowlightGainDrop
inline constexpr double kLowlightNoise = 0.03;    ///< noise sd = strength * kLowlightNoise
inline constexpr double kRainDensity = 1.0 / 40;  ///< streaks per px at strength 1
inline constexpr double kSnowDensity = 1.0 / 30;  ///< flakes per px at strength 1

/// Smooth two-colour gradient, a few oriented gratings and hard-edged rectangles and discs.
inline ImageBuffer procedural_texture(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7e47));
  ImageBuffer img(h, w, 3);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double norm = std::abs(gx) * double(w) + std::abs(gy) * double(h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double t = std::clamp(0.5 + (gx * (double(x) - 0.5 * double(w)) + gy * (double(y) - 0.5 * double(h))) / norm, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = c0[c] + (c1[c] - c0[c]) * t;
    }

  const int gratings = 2 + static_cast<int>(rng.uniform_int(3));
  for (int g = 0; g < gratings; ++g) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double period = rng.uniform(4.0, 24.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double amp[3];
    for (double& a : amp) a = rng.uniform(-0.12, 0.12);
    const double fx = std::cos(theta) * 2.0 * std::numbers::pi / period;
    const double fy = std::sin(theta) * 2.0 * std::numbers::pi / period;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double s = std::sin(fx * double(x) + fy * double(y) + phase);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp[c] * s;
      }
  }

  const int shapes = 3 + static_cast<int>(rng.uniform_int(6));
  for (int k = 0; k < shapes; ++k) {
    const bool disc = rng.coin();
    const double cx = rng.uniform(0.0, double(w));
    const double cy = rng.uniform(0.0, double(h));
    const double rx = rng.uniform(0.05, 0.3) * double(w);
    const double ry = rng.uniform(0.05, 0.3) * double(h);
    double col[3];
    for (double& v : col) v = rng.uniform(0.05, 0.95);
    const double alpha = rng.uniform(0.4, 0.9);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dx = (double(x) - cx) / rx;
        const double dy = (double(y) - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1.0 - alpha) * img.at(y, x, c) + alpha * col[c];
      }
  }
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
  return img;
}

namespace detail {

inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    total += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= total;
  ImageBuffer tmp = img, out = img;
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 img.at(y, ops::reflect_index(static_cast<std::ptrdiff_t>(x) + i, img.w), c);
        tmp.at(y, x, c) = acc;
      }
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 tmp.at(ops::reflect_index(static_cast<std::ptrdiff_t>(y) + i, img.h), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

/// Blends each pixel toward `tone` by the per-pixel coverage in `mask`.
inline ImageBuffer overlay(const ImageBuffer& img, const std::vector<double>& mask, double tone) {
  ImageBuffer out = img;
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) {
      const double a = mask[y * img.w + x];
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < img.channels; ++c) out.at(y, x, c) = (1.0 - a) * img.at(y, x, c) + a * tone;
    }
  return out;
}

inline std::size_t element_count(double density, double strength, const ImageBuffer& img) {
  return static_cast<std::size_t>(std::llround(density * strength * double(img.h * img.w)));
}

inline ImageBuffer rain(const ImageBuffer& img, Rng& rng, double strength) {
  std::vector<double> mask(img.h * img.w, 0.0);
  const double tilt = rng.uniform(-0.35, 0.35);  // radians from vertical, shared by all streaks
  const double dx = std::sin(tilt), dy = std::cos(tilt);
  const std::size_t count = element_count(kRainDensity, strength, img);
  for (std::size_t i = 0; i < count; ++i) {
    const double x0 = rng.uniform(0.0, double(img.w));
    const double y0 = rng.uniform(-4.0, double(img.h));
    const double length = rng.uniform(4.0, 14.0);
    const double alpha = rng.uniform(0.3, 0.7);
    for (double t = 0.0; t <= length; t += 0.5) {
      const auto px = static_cast<std::ptrdiff_t>(std::floor(x0 + t * dx));
      const auto py = static_cast<std::ptrdiff_t>(std::floor(y0 + t * dy));
      if (px < 0 || py < 0 || px >= std::ptrdiff_t(img.w) || py >= std::ptrdiff_t(img.h)) continue;
      double& m = mask[std::size_t(py) * img.w + std::size_t(px)];
      m = std::max(m, alpha);
    }
  }
  return overlay(img, mask, 0.9);
}

inline ImageBuffer snow(const ImageBuffer& img, Rng& rng, double strength) {
  std::vector<double> mask(img.h * img.w, 0.0);
  const std::size_t count = element_count(kSnowDensity, strength, img);
  for (std::size_t i = 0; i < count; ++i) {
    const double cx = rng.uniform(0.0, double(img.w));
    const double cy = rng.uniform(0.0, double(img.h));
    const double radius = rng.uniform(0.6, 2.2);
    const double alpha = rng.uniform(0.6, 0.95);
    const auto x_lo = static_cast<std::ptrdiff_t>(std::floor(cx - radius));
    const auto y_lo = static_cast<std::ptrdiff_t>(std::floor(cy - radius));
    for (std::ptrdiff_t py = y_lo; py <= static_cast<std::ptrdiff_t>(std::ceil(cy + radius)); ++py)
      for (std::ptrdiff_t px = x_lo; px <= static_cast<std::ptrdiff_t>(std::ceil(cx + radius)); ++px) {
        if (px < 0 || py < 0 || px >= std::ptrdiff_t(img.w) || py >= std::ptrdiff_t(img.h)) continue;
        const double d = std::hypot(double(px) + 0.5 - cx, double(py) + 0.5 - cy);
        const double a = alpha * std::clamp(1.0 - d / radius, 0.0, 1.0);
        double& m = mask[std::size_t(py) * img.w + std::size_t(px)];
        m = std::max(m, a);
      }
  }
  return overlay(img, mask, 0.95);
}

}  // namespace detail

/// Closed-form low-light map without noise: gain(s) * x^gamma(s).
inline double lowlight_curve(double x, double strength) {
  const double gamma = 1.0 + strength * (kLowlightGammaMax - 1.0);
  const double gain = 1.0 - strength * kLowlightGainDrop;
  return gain * std::pow(x, gamma);
}

/// blur: Gaussian, sigma = s * kBlurSigmaMax, reflect borders.
/// lowlight: gain * x^gamma plus N(0, (s * kLowlightNoise)^2) per value, clamped.
/// rain: seeded streaks sharing one tilt, blended toward 0.9.
/// snow: seeded soft discs blended toward 0.95.
inline ImageBuffer synthesize(DegradationKind kind, const ImageBuffer& clean, std::uint64_t seed, double strength) {
  clean.validate();
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ConfigError("synthesize: strength must lie in [0, 1], got " + std::to_string(strength));
  }
  if (strength == 0.0) return clean;
  Rng rng(derive_seed(seed, 0xde9 + static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case DegradationKind::blur:
      return detail::gaussian_blur(clean, strength * kBlurSigmaMax);
    case DegradationKind::lowlight: {
      ImageBuffer out = clean;
      const double sd = strength * kLowlightNoise;
      for (double& v : out.values) v = std::clamp(lowlight_curve(v, strength) + sd * rng.normal(), 0.0, 1.0);
      return out;
    }
    case DegradationKind::rain:
      return detail::rain(clean, rng, strength);
    case DegradationKind::snow:
      return detail::snow(clean, rng, strength);
  }
  throw ConfigError("synthesize: unknown kind");
}

}  // namespace simpleir
