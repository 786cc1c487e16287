#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "simpleir/objective/loss.hpp"
#include "simpleir/objective/metrics.hpp"
#include "test_support.hpp"

namespace simpleir {
namespace {

using testing::check_gradients;
using testing::random_tensor;

double loss_of(const Tensor& a, const Tensor& b, double lambda = 0.1) {
  return restoration_loss_value(a, b, LossConfig{lambda});
}

// Direct DFT with |Re| + |Im| per bin, mean over bins.
double direct_frequency_l1(const Tensor& a, const Tensor& b) {
  const Shape s = a.shape();
  const double pi = std::acos(-1.0);
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t u = 0; u < s.h; ++u)
        for (std::size_t v = 0; v < s.w; ++v) {
          std::complex<double> acc = 0.0;
          for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
              const double theta = -2.0 * pi * (double(u * y) / double(s.h) + double(v * x) / double(s.w));
              acc += (a.at(n, c, y, x) - b.at(n, c, y, x)) * std::polar(1.0, theta);
            }
          total += std::abs(acc.real()) + std::abs(acc.imag());
        }
  return total / double(s.numel());
}

// Per-window SSIM with an explicit 2-D Gaussian; no separable filtering.
double reference_ssim(const Tensor& x, const Tensor& y) {
  const Shape s = x.shape();
  const int k = 11;
  const double sigma = 1.5;
  double w2[11][11];
  double total_w = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      w2[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * sigma * sigma));
      total_w += w2[i][j];
    }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double sum = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      double plane = 0.0;
      std::size_t count = 0;
      for (std::size_t oy = 0; oy + k <= s.h; ++oy)
        for (std::size_t ox = 0; ox + k <= s.w; ++ox) {
          double mx = 0, my = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double wt = w2[i][j] / total_w;
              mx += wt * x.at(n, c, oy + i, ox + j);
              my += wt * y.at(n, c, oy + i, ox + j);
            }
          double vx = 0, vy = 0, cxy = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double wt = w2[i][j] / total_w;
              const double dx = x.at(n, c, oy + i, ox + j) - mx;
              const double dy = y.at(n, c, oy + i, ox + j) - my;
              vx += wt * dx * dx;
              vy += wt * dy * dy;
              cxy += wt * dx * dy;
            }
          plane += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
          ++count;
        }
      sum += plane / double(count);
    }
  return sum / double(s.n * s.c);
}

TEST(RestorationLoss, IdenticalImagesGiveZero) {
  const Tensor a = random_tensor({1, 3, 8, 8}, 1, 0.0, 1.0);
  EXPECT_EQ(loss_of(a, a), 0.0);
}

TEST(RestorationLoss, ZeroLambdaIsMeanAbsoluteError) {
  const Tensor a = random_tensor({1, 3, 6, 5}, 2, 0.0, 1.0);
  const Tensor b = random_tensor({1, 3, 6, 5}, 3, 0.0, 1.0);
  double mae = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mae += std::abs(a[i] - b[i]);
  mae /= double(a.size());
  EXPECT_NEAR(loss_of(a, b, 0.0), mae, 1e-12);
}

TEST(RestorationLoss, TwoByTwoSinglePixelDelta) {
  const Tensor ref({1, 1, 2, 2}, std::vector<double>{0.2, 0.4, 0.6, 0.3});
  Tensor out = ref;
  out[1] += 0.5;
  Graph g(false);
  EXPECT_NEAR(l1_mean(g.constant(out), g.constant(ref)).value().item(), 0.125, 1e-15);
  const double freq = direct_frequency_l1(out, ref);
  EXPECT_NEAR(freq, 0.5, 1e-12);
  EXPECT_NEAR(loss_of(out, ref), 0.125 + 0.1 * freq, 1e-12);
}

TEST(RestorationLoss, FrequencyTermMatchesDirectDft) {
  const Tensor a = random_tensor({1, 2, 5, 6}, 4);
  const Tensor b = random_tensor({1, 2, 5, 6}, 5);
  Graph g(false);
  EXPECT_NEAR(frequency_l1_mean(g.constant(a), g.constant(b)).value().item(), direct_frequency_l1(a, b), 1e-12);
}

TEST(RestorationLoss, SymmetricAndNonNegative) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor a = random_tensor({1, 3, 4, 7}, 10 + seed, 0.0, 1.0);
    const Tensor b = random_tensor({1, 3, 4, 7}, 20 + seed, 0.0, 1.0);
    EXPECT_GT(loss_of(a, b), 0.0);
    EXPECT_NEAR(loss_of(a, b), loss_of(b, a), 1e-15);
  }
}

TEST(RestorationLoss, GradientMatchesFiniteDifferences) {
  const Tensor ref = random_tensor({1, 3, 4, 6}, 30);
  const Tensor out = random_tensor({1, 3, 4, 6}, 31);
  const auto result = check_gradients(
      [&](Graph& g, const std::vector<Var>& v) { return restoration_loss(v[0], g.constant(ref)); }, {out});
  EXPECT_LT(result.max_rel_error, 1e-5);
}

TEST(RestorationLoss, RejectsMismatchAndNegativeLambda) {
  EXPECT_THROW(loss_of(Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 5})), DimensionError);
  EXPECT_THROW(loss_of(Tensor({1, 3, 4, 4}), Tensor({1, 3, 4, 4}), -0.1), ConfigError);
}

TEST(Psnr, IdenticalIsInfinite) {
  const Tensor a = random_tensor({1, 3, 8, 8}, 6, 0.0, 1.0);
  EXPECT_EQ(psnr({a, a}), std::numeric_limits<double>::infinity());
}

TEST(Psnr, UniformDifferencesMatchClosedForm) {
  const Tensor ref({1, 3, 4, 4}, 0.5);
  EXPECT_NEAR(psnr({Tensor({1, 3, 4, 4}, 0.6), ref}), 20.0, 1e-9);
  EXPECT_NEAR(psnr({Tensor({1, 3, 4, 4}, 0.4), ref}), 20.0, 1e-9);
  EXPECT_NEAR(psnr({Tensor({1, 3, 4, 4}, 1.0), Tensor({1, 3, 4, 4}, 0.0)}), 0.0, 1e-12);
}

TEST(Psnr, ClampsBeforeMeasuring) {
  const Tensor ref({1, 1, 2, 2}, 1.0);
  EXPECT_EQ(psnr({Tensor({1, 1, 2, 2}, 1.7), ref}), std::numeric_limits<double>::infinity());
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Tensor ref({1, 3, 8, 8}, 0.5);
  const Tensor noise = random_tensor({1, 3, 8, 8}, 7);
  double previous = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.05, 0.1, 0.2, 0.4}) {
    Tensor noisy = ref;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += amp * noise[i];
    const double p = psnr({noisy, ref});
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, IdenticalIsOne) {
  const Tensor a = random_tensor({1, 3, 16, 13}, 8, 0.0, 1.0);
  EXPECT_NEAR(ssim({a, a}), 1.0, 1e-9);
}

TEST(Ssim, MatchesReferenceOnRandomPairs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor a = random_tensor({1, 3, 14 + seed % 3, 12 + seed % 4}, 100 + seed, 0.0, 1.0);
    Tensor b = a;
    const Tensor noise = random_tensor(a.shape(), 200 + seed, -0.2, 0.2);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(b[i] + noise[i], 0.0, 1.0);
    EXPECT_NEAR(ssim({a, b}), reference_ssim(a, b), 1e-4) << "seed " << seed;
  }
}

TEST(Ssim, NegativeImageScoresLow) {
  const Tensor a = random_tensor({1, 3, 16, 16}, 9, 0.0, 1.0);
  Tensor neg = a;
  for (double& v : neg.data()) v = 1.0 - v;
  EXPECT_LT(ssim({a, neg}), 0.3);
}

TEST(Ssim, Symmetric) {
  const Tensor a = random_tensor({1, 3, 12, 12}, 11, 0.0, 1.0);
  const Tensor b = random_tensor({1, 3, 12, 12}, 12, 0.0, 1.0);
  EXPECT_NEAR(ssim({a, b}), ssim({b, a}), 1e-14);
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
  EXPECT_THROW(ssim({Tensor({1, 3, 10, 20}), Tensor({1, 3, 10, 20})}), DimensionError);
}

TEST(MetricReport, AggregatesAndRoundTrips) {
  const MetricReport r = aggregate({{30.0, 0.9, 0.02, 1}, {20.0, 0.7, 0.04, 1}});
  EXPECT_EQ(r.sample_count, 2u);
  EXPECT_NEAR(r.psnr, 25.0, 1e-12);
  EXPECT_NEAR(r.ssim, 0.8, 1e-12);
  EXPECT_NEAR(r.loss, 0.03, 1e-12);
  const MetricReport back = parse_metric_text(to_text(r));
  EXPECT_NEAR(back.psnr, r.psnr, 1e-6);
  EXPECT_EQ(back.sample_count, 2u);
}

TEST(MetricReport, InfinityRendersAsInf) {
  const MetricReport r{std::numeric_limits<double>::infinity(), 1.0, 0.0, 1};
  EXPECT_NE(to_text(r).find("psnr = inf"), std::string::npos);
  EXPECT_NE(to_line(r).find("psnr=inf"), std::string::npos);
  EXPECT_TRUE(std::isinf(parse_metric_text(to_text(r)).psnr));
}

}  // namespace
}  // namespace simpleir
