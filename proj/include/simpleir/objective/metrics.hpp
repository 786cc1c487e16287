#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

/// Restored output and its ground truth. Metrics clamp both to [0, 1].
struct ImagePair {
  Tensor restored;
  Tensor reference;
};

inline Tensor clamp_unit(Tensor t) {
  for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

/// PSNR in dB; identical inputs give +infinity.
inline double psnr(const ImagePair& pair, double max_val = 1.0) {
  require_same_shape(pair.restored, pair.reference, "psnr");
  if (pair.restored.empty()) throw DimensionError("psnr: empty images");
  const Tensor a = clamp_unit(pair.restored);
  const Tensor b = clamp_unit(pair.reference);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

inline std::vector<double> gaussian_window_1d(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

namespace detail {

/// Separable Gaussian filtering over the valid region of one plane.
inline std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                        const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += g[t] * plane[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += g[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean structural similarity over valid Gaussian windows, averaged over every (n, c) plane.
inline double ssim(const ImagePair& pair, const SsimConfig& cfg = {}) {
  require_same_shape(pair.restored, pair.reference, "ssim");
  const Shape s = pair.restored.shape();
  if (s.h < cfg.window || s.w < cfg.window) {
    throw DimensionError("ssim: image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " smaller than the " + std::to_string(cfg.window) + "px window");
  }
  const Tensor a = clamp_unit(pair.restored);
  const Tensor b = clamp_unit(pair.reference);
  const std::vector<double> g = gaussian_window_1d(cfg.window, cfg.sigma);
  const double c1 = std::pow(cfg.k1 * cfg.dynamic_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.dynamic_range, 2);
  const std::size_t hw = s.plane();
  std::vector<double> aa(hw), bb(hw), ab(hw);
  double total = 0.0;
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double* pa = a.data().data() + nc * hw;
    const double* pb = b.data().data() + nc * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = detail::filter_valid(pa, s.h, s.w, g);
    const auto mu_b = detail::filter_valid(pb, s.h, s.w, g);
    const auto e_aa = detail::filter_valid(aa.data(), s.h, s.w, g);
    const auto e_bb = detail::filter_valid(bb.data(), s.h, s.w, g);
    const auto e_ab = detail::filter_valid(ab.data(), s.h, s.w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(s.n * s.c);
}

/// Aggregated evaluation result over a set of samples.
struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double loss = 0.0;
  std::size_t sample_count = 0;
};

/// Arithmetic means of per-sample reports (each with sample_count 1 or more, weighted equally
/// per sample).
inline MetricReport aggregate(const std::vector<MetricReport>& samples) {
  MetricReport r;
  for (const MetricReport& s : samples) {
    r.psnr += s.psnr;
    r.ssim += s.ssim;
    r.loss += s.loss;
    ++r.sample_count;
  }
  if (r.sample_count > 0) {
    const auto n = static_cast<double>(r.sample_count);
    r.psnr /= n;
    r.ssim /= n;
    r.loss /= n;
  }
  return r;
}

inline std::string format_number(double v, int precision = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline double parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw FormatError("malformed number '" + s + "'");
  return v;
}

/// Flat "key = value" block.
inline std::string to_text(const MetricReport& r) {
  std::ostringstream os;
  os << "psnr = " << format_number(r.psnr) << "\n"
     << "ssim = " << format_number(r.ssim) << "\n"
     << "loss = " << format_number(r.loss) << "\n"
     << "samples = " << r.sample_count << "\n";
  return os.str();
}

/// Single machine-readable line: `metrics psnr=<v> ssim=<v> loss=<v> samples=<n>`.
inline std::string to_line(const MetricReport& r) {
  return "metrics psnr=" + format_number(r.psnr, 9) + " ssim=" + format_number(r.ssim, 9) +
         " loss=" + format_number(r.loss, 9) + " samples=" + std::to_string(r.sample_count);
}

inline MetricReport parse_metric_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  for (const char* key : {"psnr", "ssim", "loss", "samples"}) {
    if (!kv.count(key)) throw FormatError(std::string("metric block missing '") + key + "'");
  }
  return MetricReport{parse_number(kv["psnr"]), parse_number(kv["ssim"]), parse_number(kv["loss"]),
                      static_cast<std::size_t>(std::stoull(kv["samples"]))};
}

}  // namespace simpleir
