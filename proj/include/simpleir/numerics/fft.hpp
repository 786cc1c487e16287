#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

using Complex = std::complex<double>;

/// NCHW array of complex values, the spectrum of a Tensor.
struct ComplexTensor {
  Shape shape{};
  std::vector<Complex> data;

  ComplexTensor() = default;
  explicit ComplexTensor(Shape s) : shape(s), data(s.numel()) {}
};

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place 1D transform of `n` elements spaced by `stride`. sign = -1 forward, +1 inverse
/// (unnormalized in both directions).
inline void dft1d(Complex* base, std::size_t n, std::size_t stride, int sign,
                  std::vector<Complex>& scratch) {
  if (n <= 1) return;
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = base[i * stride];

  if (is_power_of_two(n)) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(scratch[i], scratch[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const Complex tw = std::polar(1.0, ang * static_cast<double>(k));
          const Complex u = scratch[i + k];
          const Complex v = scratch[i + k + len / 2] * tw;
          scratch[i + k] = u + v;
          scratch[i + k + len / 2] = u - v;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) base[i * stride] = scratch[i];
    return;
  }

  // Direct summation for non power-of-two lengths.
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang =
          sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += scratch[t] * std::polar(1.0, ang);
    }
    base[k * stride] = acc;
  }
}

inline void transform_planes(ComplexTensor& x, int sign) {
  const Shape s = x.shape;
  std::vector<Complex> scratch;
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    Complex* plane = x.data.data() + nc * s.plane();
    for (std::size_t y = 0; y < s.h; ++y) dft1d(plane + y * s.w, s.w, 1, sign, scratch);
    for (std::size_t xw = 0; xw < s.w; ++xw) dft1d(plane + xw, s.h, s.w, sign, scratch);
  }
}

}  // namespace detail

/// Unnormalized forward 2D DFT of every (n, c) plane.
inline ComplexTensor fft2(const Tensor& x) {
  ComplexTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = Complex(x[i], 0.0);
  detail::transform_planes(out, -1);
  return out;
}

inline ComplexTensor fft2(ComplexTensor x) {
  detail::transform_planes(x, -1);
  return x;
}

/// Inverse 2D DFT normalized by 1/(h*w).
inline ComplexTensor ifft2(ComplexTensor x) {
  detail::transform_planes(x, +1);
  const double inv = 1.0 / static_cast<double>(x.shape.plane());
  for (Complex& v : x.data) v *= inv;
  return x;
}

/// Sum over bins of |Re(a-b)| + |Im(a-b)|.
inline double complex_l1(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.shape != b.shape) {
    throw DimensionError("complex_l1: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const Complex d = a.data[i] - b.data[i];
    acc += std::abs(d.real()) + std::abs(d.imag());
  }
  return acc;
}

}  // namespace simpleir
