#pragma once

// Pure forward and backward kernels over Tensor. The differentiable wrappers
// in autodiff.hpp compose these; nothing here records gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "simpleir/numerics/errors.hpp"
#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

/// Spatial padding applied before a convolution.
struct Padding {
  enum class Mode { zeros, reflect };

  Mode mode = Mode::zeros;
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding none() { return {}; }
  static Padding zeros(std::size_t p) { return {Mode::zeros, p, p, p, p}; }
  /// Reflect padding that preserves h x w for a stride-1 kh x kw kernel.
  static Padding same_reflect(std::size_t kh, std::size_t kw) {
    return {Mode::reflect, (kh - 1) / 2, kh / 2, (kw - 1) / 2, kw / 2};
  }
  bool is_none() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
};

enum class Activation { relu, gelu, sigmoid };

namespace ops {

/// Mirror index without edge repetition; folds repeatedly for pads wider than the axis.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

// ---------------------------------------------------------------------------
// padding / cropping

inline Tensor pad2d(const Tensor& x, const Padding& p) {
  const Shape s = x.shape();
  if (p.is_none()) return x;
  if (s.h == 0 || s.w == 0) throw DimensionError("pad2d: empty spatial extent");
  Tensor out(Shape{s.n, s.c, s.h + p.top + p.bottom, s.w + p.left + p.right});
  const Shape o = out.shape();
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double* src = x.data().data() + nc * s.plane();
    double* dst = out.data().data() + nc * o.plane();
    for (std::size_t oh = 0; oh < o.h; ++oh) {
      const auto ih = static_cast<std::ptrdiff_t>(oh) - static_cast<std::ptrdiff_t>(p.top);
      const bool row_in = ih >= 0 && ih < static_cast<std::ptrdiff_t>(s.h);
      if (p.mode == Padding::Mode::zeros && !row_in) continue;
      const std::size_t sh = row_in ? static_cast<std::size_t>(ih) : reflect_index(ih, s.h);
      for (std::size_t ow = 0; ow < o.w; ++ow) {
        const auto iw = static_cast<std::ptrdiff_t>(ow) - static_cast<std::ptrdiff_t>(p.left);
        const bool col_in = iw >= 0 && iw < static_cast<std::ptrdiff_t>(s.w);
        if (col_in) {
          dst[oh * o.w + ow] = src[sh * s.w + static_cast<std::size_t>(iw)];
        } else if (p.mode == Padding::Mode::reflect) {
          dst[oh * o.w + ow] = src[sh * s.w + reflect_index(iw, s.w)];
        }
      }
    }
  }
  return out;
}

/// Adjoint of pad2d: folds padded-space gradients back onto source pixels.
inline Tensor pad2d_backward(const Tensor& grad_out, const Shape& in, const Padding& p) {
  if (p.is_none()) return grad_out;
  Tensor gx(in);
  const Shape o = grad_out.shape();
  for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
    const double* g = grad_out.data().data() + nc * o.plane();
    double* dst = gx.data().data() + nc * in.plane();
    for (std::size_t oh = 0; oh < o.h; ++oh) {
      const auto ih = static_cast<std::ptrdiff_t>(oh) - static_cast<std::ptrdiff_t>(p.top);
      const bool row_in = ih >= 0 && ih < static_cast<std::ptrdiff_t>(in.h);
      if (p.mode == Padding::Mode::zeros && !row_in) continue;
      const std::size_t sh = row_in ? static_cast<std::size_t>(ih) : reflect_index(ih, in.h);
      for (std::size_t ow = 0; ow < o.w; ++ow) {
        const auto iw = static_cast<std::ptrdiff_t>(ow) - static_cast<std::ptrdiff_t>(p.left);
        const bool col_in = iw >= 0 && iw < static_cast<std::ptrdiff_t>(in.w);
        if (col_in) {
          dst[sh * in.w + static_cast<std::size_t>(iw)] += g[oh * o.w + ow];
        } else if (p.mode == Padding::Mode::reflect) {
          dst[sh * in.w + reflect_index(iw, in.w)] += g[oh * o.w + ow];
        }
      }
    }
  }
  return gx;
}

inline Tensor crop2d(const Tensor& x, std::size_t top, std::size_t left, std::size_t h,
                     std::size_t w) {
  const Shape s = x.shape();
  if (top + h > s.h || left + w > s.w) {
    throw DimensionError("crop2d: window exceeds input " + s.str());
  }
  Tensor out(Shape{s.n, s.c, h, w});
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = x.data().data() + nc * s.plane() + (top + y) * s.w + left;
      std::copy(src, src + w, out.data().data() + nc * h * w + y * w);
    }
  }
  return out;
}

inline Tensor crop2d_backward(const Tensor& grad_out, const Shape& in, std::size_t top,
                              std::size_t left) {
  Tensor gx(in);
  const Shape o = grad_out.shape();
  for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
    for (std::size_t y = 0; y < o.h; ++y) {
      const double* src = grad_out.data().data() + nc * o.plane() + y * o.w;
      std::copy(src, src + o.w, gx.data().data() + nc * in.plane() + (top + y) * in.w + left);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// convolution (valid region; callers pad first)

inline Shape conv2d_output_shape(const Shape& x, const Shape& w, std::size_t stride,
                                 std::size_t groups) {
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (groups == 0 || x.c % groups != 0) {
    throw ConfigError("conv2d: groups " + std::to_string(groups) + " does not divide " +
                      std::to_string(x.c) + " input channels");
  }
  if (w.n % groups != 0) {
    throw ConfigError("conv2d: groups " + std::to_string(groups) + " does not divide " +
                      std::to_string(w.n) + " output channels");
  }
  if (w.c != x.c / groups) {
    throw DimensionError("conv2d: channel axis mismatch, weight expects " + std::to_string(w.c) +
                         " channels per group, input provides " + std::to_string(x.c / groups));
  }
  if (w.h > x.h || w.h == 0) {
    throw DimensionError("conv2d: height axis, kernel " + std::to_string(w.h) +
                         " exceeds padded input " + std::to_string(x.h));
  }
  if (w.w > x.w || w.w == 0) {
    throw DimensionError("conv2d: width axis, kernel " + std::to_string(w.w) +
                         " exceeds padded input " + std::to_string(x.w));
  }
  return Shape{x.n, w.n, (x.h - w.h) / stride + 1, (x.w - w.w) / stride + 1};
}

inline Tensor conv2d_valid(const Tensor& x, const Tensor& weight, const Tensor* bias,
                           std::size_t stride, std::size_t groups) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape os = conv2d_output_shape(xs, ws, stride, groups);
  if (bias != nullptr && bias->size() != ws.n) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias->size()) +
                         " does not match output channels " + std::to_string(ws.n));
  }
  Tensor out(os);
  const std::size_t cin_g = ws.c;
  const std::size_t cout_g = ws.n / groups;
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  double* od = out.data().data();
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t oc = 0; oc < ws.n; ++oc) {
      const std::size_t g = oc / cout_g;
      double* oplane = od + (n * os.c + oc) * os.plane();
      if (bias != nullptr) std::fill(oplane, oplane + os.plane(), (*bias)[oc]);
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const std::size_t ic = g * cin_g + icg;
        const double* xplane = xd + (n * xs.c + ic) * xs.plane();
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = wd[((oc * cin_g + icg) * ws.h + kh) * ws.w + kw];
            if (wv == 0.0) continue;
            for (std::size_t oh = 0; oh < os.h; ++oh) {
              const double* xrow = xplane + (oh * stride + kh) * xs.w + kw;
              double* orow = oplane + oh * os.w;
              if (stride == 1) {
                for (std::size_t ow = 0; ow < os.w; ++ow) orow[ow] += wv * xrow[ow];
              } else {
                for (std::size_t ow = 0; ow < os.w; ++ow) orow[ow] += wv * xrow[ow * stride];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

inline Tensor conv2d_valid_backward_input(const Tensor& grad_out, const Tensor& weight,
                                          const Shape& in, std::size_t stride,
                                          std::size_t groups) {
  const Shape ws = weight.shape();
  const Shape os = grad_out.shape();
  Tensor gx(in);
  const std::size_t cin_g = ws.c;
  const std::size_t cout_g = ws.n / groups;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oc = 0; oc < ws.n; ++oc) {
      const std::size_t g = oc / cout_g;
      const double* gplane = grad_out.data().data() + (n * os.c + oc) * os.plane();
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const std::size_t ic = g * cin_g + icg;
        double* xplane = gx.data().data() + (n * in.c + ic) * in.plane();
        for (std::size_t kh = 0; kh < ws.h; ++kh) {
          for (std::size_t kw = 0; kw < ws.w; ++kw) {
            const double wv = weight.data()[((oc * cin_g + icg) * ws.h + kh) * ws.w + kw];
            if (wv == 0.0) continue;
            for (std::size_t oh = 0; oh < os.h; ++oh) {
              double* xrow = xplane + (oh * stride + kh) * in.w + kw;
              const double* grow = gplane + oh * os.w;
              for (std::size_t ow = 0; ow < os.w; ++ow) xrow[ow * stride] += wv * grow[ow];
            }
          }
        }
      }
    }
  }
  return gx;
}

inline Tensor conv2d_valid_backward_weight(const Tensor& grad_out, const Tensor& x,
                                           const Shape& wshape, std::size_t stride,
                                           std::size_t groups) {
  const Shape xs = x.shape();
  const Shape os = grad_out.shape();
  Tensor gw(wshape);
  const std::size_t cin_g = wshape.c;
  const std::size_t cout_g = wshape.n / groups;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t oc = 0; oc < wshape.n; ++oc) {
      const std::size_t g = oc / cout_g;
      const double* gplane = grad_out.data().data() + (n * os.c + oc) * os.plane();
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const std::size_t ic = g * cin_g + icg;
        const double* xplane = x.data().data() + (n * xs.c + ic) * xs.plane();
        for (std::size_t kh = 0; kh < wshape.h; ++kh) {
          for (std::size_t kw = 0; kw < wshape.w; ++kw) {
            double acc = 0.0;
            for (std::size_t oh = 0; oh < os.h; ++oh) {
              const double* xrow = xplane + (oh * stride + kh) * xs.w + kw;
              const double* grow = gplane + oh * os.w;
              for (std::size_t ow = 0; ow < os.w; ++ow) acc += grow[ow] * xrow[ow * stride];
            }
            gw[((oc * cin_g + icg) * wshape.h + kh) * wshape.w + kw] += acc;
          }
        }
      }
    }
  }
  return gw;
}

/// Sum of grad_out over batch and space per output channel, shaped like the bias.
inline Tensor channel_sum(const Tensor& grad_out, const Shape& bias_shape) {
  const Shape os = grad_out.shape();
  Tensor gb(bias_shape);
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t c = 0; c < os.c; ++c) {
      const double* p = grad_out.data().data() + (n * os.c + c) * os.plane();
      double acc = 0.0;
      for (std::size_t i = 0; i < os.plane(); ++i) acc += p[i];
      gb[c] += acc;
    }
  }
  return gb;
}

inline Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias,
                     std::size_t stride, const Padding& padding, std::size_t groups) {
  return conv2d_valid(pad2d(x, padding), weight, bias, stride, groups);
}

// ---------------------------------------------------------------------------
// layer norm over the channel axis at every (n, h, w)

struct LayerNormCache {
  Tensor normalized;             // x-hat, same shape as x
  std::vector<double> inv_std;   // one per (n, h, w)
};

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                         LayerNormCache* cache = nullptr) {
  const Shape s = x.shape();
  if (s.c == 0) throw ConfigError("layer_norm: zero-length channel axis");
  if (gamma.size() != s.c || beta.size() != s.c) {
    throw DimensionError("layer_norm: gamma/beta length must equal channel count " +
                         std::to_string(s.c));
  }
  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv(s.n * s.plane());
  const std::size_t hw = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      const double* base = x.data().data() + n * s.c * hw + p;
      double mean = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) mean += base[c * hw];
      mean /= static_cast<double>(s.c);
      double var = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double d = base[c * hw] - mean;
        var += d * d;
      }
      var /= static_cast<double>(s.c);
      const double is = 1.0 / std::sqrt(var + eps);
      inv[n * hw + p] = is;
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t idx = n * s.c * hw + c * hw + p;
        const double xh = (x[idx] - mean) * is;
        xhat[idx] = xh;
        out[idx] = gamma[c] * xh + beta[c];
      }
    }
  }
  if (cache != nullptr) *cache = LayerNormCache{std::move(xhat), std::move(inv)};
  return out;
}

struct LayerNormGrads {
  Tensor x, gamma, beta;
};

inline LayerNormGrads layer_norm_backward(const Tensor& grad_out, const Tensor& gamma,
                                          const LayerNormCache& cache) {
  const Shape s = grad_out.shape();
  const std::size_t hw = s.plane();
  LayerNormGrads g{Tensor(s), Tensor(gamma.shape()), Tensor(gamma.shape())};
  const auto cn = static_cast<double>(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      double sum_dxh = 0.0;
      double sum_dxh_xh = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t idx = n * s.c * hw + c * hw + p;
        const double dxh = grad_out[idx] * gamma[c];
        sum_dxh += dxh;
        sum_dxh_xh += dxh * cache.normalized[idx];
        g.gamma[c] += grad_out[idx] * cache.normalized[idx];
        g.beta[c] += grad_out[idx];
      }
      const double is = cache.inv_std[n * hw + p];
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t idx = n * s.c * hw + c * hw + p;
        const double dxh = grad_out[idx] * gamma[c];
        g.x[idx] = is / cn * (cn * dxh - sum_dxh - cache.normalized[idx] * sum_dxh_xh);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// activations

inline double gaussian_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::gelu:
      return x * gaussian_cdf(x);
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

inline double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::gelu: {
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return gaussian_cdf(x) + x * pdf;
    }
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

inline Tensor activation(Activation kind, const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(kind, x[i]);
  return out;
}

inline Tensor activation_backward(Activation kind, const Tensor& grad_out, const Tensor& x) {
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = grad_out[i] * activate_derivative(kind, x[i]);
  return gx;
}

// ---------------------------------------------------------------------------
// pooling and fully connected

inline Tensor global_avg_pool(const Tensor& x) {
  const Shape s = x.shape();
  if (s.plane() == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  Tensor out(Shape{s.n, s.c, 1, 1});
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double* p = x.data().data() + nc * s.plane();
    double acc = 0.0;
    for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
    out[nc] = acc / static_cast<double>(s.plane());
  }
  return out;
}

inline Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& in) {
  Tensor gx(in);
  const double inv = 1.0 / static_cast<double>(in.plane());
  for (std::size_t nc = 0; nc < in.n * in.c; ++nc) {
    std::fill_n(gx.data().data() + nc * in.plane(), in.plane(), grad_out[nc] * inv);
  }
  return gx;
}

/// x: (n, c_in, 1, 1); weight: (c_out, c_in, 1, 1); bias: c_out elements.
inline Tensor fully_connected(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (xs.h * xs.w != 1 || ws.h * ws.w != 1) {
    throw DimensionError("fully_connected: expects (n, c, 1, 1) input and (out, in, 1, 1) weight");
  }
  if (ws.c != xs.c) {
    throw DimensionError("fully_connected: inner axis mismatch, weight " + std::to_string(ws.c) +
                         " vs input " + std::to_string(xs.c));
  }
  if (bias.size() != ws.n) throw DimensionError("fully_connected: bias length mismatch");
  Tensor out(Shape{xs.n, ws.n, 1, 1});
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < ws.c; ++i) acc += weight[o * ws.c + i] * x[n * xs.c + i];
      out[n * ws.n + o] = acc;
    }
  }
  return out;
}

struct FullyConnectedGrads {
  Tensor x, weight, bias;
};

inline FullyConnectedGrads fully_connected_backward(const Tensor& grad_out, const Tensor& x,
                                                    const Tensor& weight, const Tensor& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  FullyConnectedGrads g{Tensor(xs), Tensor(ws), Tensor(bias.shape())};
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o) {
      const double go = grad_out[n * ws.n + o];
      g.bias[o] += go;
      for (std::size_t i = 0; i < ws.c; ++i) {
        g.weight[o * ws.c + i] += go * x[n * xs.c + i];
        g.x[n * xs.c + i] += go * weight[o * ws.c + i];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// sub-pixel rearrangement

/// (n, c*r*r, h, w) -> (n, c, h*r, w*r)
inline Tensor pixel_shuffle(const Tensor& x, std::size_t r) {
  const Shape s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: channel axis " + std::to_string(s.c) +
                         " not divisible by r^2 = " + std::to_string(r * r));
  }
  const std::size_t oc = s.c / (r * r);
  Tensor out(Shape{s.n, oc, s.h * r, s.w * r});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t ic = c * r * r + i * r + j;
          for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t xw = 0; xw < s.w; ++xw)
              out.at(n, c, y * r + i, xw * r + j) = x.at(n, ic, y, xw);
        }
  return out;
}

/// (n, c, h*r, w*r) -> (n, c*r*r, h, w)
inline Tensor pixel_unshuffle(const Tensor& x, std::size_t r) {
  const Shape s = x.shape();
  if (r == 0 || s.h % r != 0) {
    throw DimensionError("pixel_unshuffle: height axis " + std::to_string(s.h) +
                         " not divisible by " + std::to_string(r));
  }
  if (s.w % r != 0) {
    throw DimensionError("pixel_unshuffle: width axis " + std::to_string(s.w) +
                         " not divisible by " + std::to_string(r));
  }
  const std::size_t oh = s.h / r;
  const std::size_t ow = s.w / r;
  Tensor out(Shape{s.n, s.c * r * r, oh, ow});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t oc = c * r * r + i * r + j;
          for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xw = 0; xw < ow; ++xw)
              out.at(n, oc, y, xw) = x.at(n, c, y * r + i, xw * r + j);
        }
  return out;
}

// ---------------------------------------------------------------------------
// channel slicing / concatenation / broadcasting

inline Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const Shape s = x.shape();
  if (begin + count > s.c) throw DimensionError("slice_channels: range exceeds channel axis");
  Tensor out(Shape{s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* src = x.data().data() + (n * s.c + begin) * s.plane();
    std::copy(src, src + count * s.plane(), out.data().data() + n * count * s.plane());
  }
  return out;
}

inline Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Shape first = parts.front()->shape();
  std::size_t total = 0;
  for (const Tensor* t : parts) {
    const Shape s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw DimensionError("concat_channels: non-channel axes differ " + s.str() + " vs " +
                           first.str());
    }
    total += s.c;
  }
  Tensor out(Shape{first.n, total, first.h, first.w});
  const std::size_t hw = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t offset = 0;
    for (const Tensor* t : parts) {
      const std::size_t c = t->shape().c;
      const double* src = t->data().data() + n * c * hw;
      std::copy(src, src + c * hw, out.data().data() + (n * total + offset) * hw);
      offset += c;
    }
  }
  return out;
}

/// y[n,c,:,:] = x[n,c,:,:] * s[n,c]; s has shape (n, c, 1, 1).
inline Tensor channel_scale(const Tensor& x, const Tensor& s) {
  const Shape xs = x.shape();
  if (s.shape() != Shape{xs.n, xs.c, 1, 1}) {
    throw DimensionError("channel_scale: scale shape " + s.shape().str() +
                         " does not broadcast over " + xs.str());
  }
  Tensor out(xs);
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const double* src = x.data().data() + nc * xs.plane();
    double* dst = out.data().data() + nc * xs.plane();
    for (std::size_t i = 0; i < xs.plane(); ++i) dst[i] = src[i] * s[nc];
  }
  return out;
}

}  // namespace ops
}  // namespace simpleir
