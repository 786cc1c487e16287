#include <gtest/gtest.h>

#include <cmath>

#include "simpleir/model/network.hpp"
#include "test_support.hpp"

namespace simpleir {
namespace {

using testing::random_tensor;

Tensor identity_point(std::size_t c) {
  Tensor w({c, c, 1, 1});
  for (std::size_t i = 0; i < c; ++i) w.at(i, i, 0, 0) = 1.0;
  return w;
}

Tensor delta_depth(std::size_t c, std::size_t kh, std::size_t kw) {
  Tensor w({c, 1, kh, kw});
  for (std::size_t i = 0; i < c; ++i) w.at(i, 0, kh / 2, kw / 2) = 1.0;
  return w;
}

ConvVars conv_vars(Graph& g, Tensor w) {
  const std::size_t c = w.shape().n;
  return {g.parameter(std::move(w)), g.parameter(Tensor({1, c, 1, 1}))};
}

DsaVars zero_dsa(Graph& g, std::size_t c, std::size_t hidden) {
  return {conv_vars(g, Tensor({c, c, 1, 1})),      conv_vars(g, Tensor({c, 1, 3, 3})),
          conv_vars(g, Tensor({c, c, 1, 1})),      conv_vars(g, Tensor({c, 1, 3, 3})),
          conv_vars(g, Tensor({hidden, c, 1, 1})), conv_vars(g, Tensor({c, hidden, 1, 1})),
          conv_vars(g, Tensor({c, c, 1, 1}))};
}

// ---------------------------------------------------------------------------
// DualStream attention

TEST(Dsa, ZeroWeightsGiveHalfAttentionAndZeroOutput) {
  Graph g;
  const DsaVars p = zero_dsa(g, 4, 1);
  DsaIntermediates probe;
  const Var out = dsa_forward(g.constant(random_tensor({1, 4, 3, 3}, 1)), p, &probe);
  for (double v : probe.weights.data()) EXPECT_EQ(v, 0.5);
  for (double v : probe.query.data()) EXPECT_EQ(v, 0.0);
  for (double v : probe.key.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Dsa, PreservesShape) {
  Graph g;
  const ParameterSet ps = init_params(ModelConfig{8, 1, 3, 3, 4, 4}, 3);
  const NetworkVars nv = bind_parameters(g, ps, ModelConfig{8, 1, 3, 3, 4, 4});
  const Var out = dsa_forward(g.constant(random_tensor({1, 8, 8, 8}, 2)), nv.fibs[0].dsa);
  EXPECT_EQ(out.shape(), (Shape{1, 8, 8, 8}));
}

TEST(Dsa, IdentityProjectionsMatchScalarComposition) {
  const Tensor x = random_tensor({1, 4, 2, 2}, 5);
  Graph g;
  const DsaVars p{conv_vars(g, identity_point(4)), conv_vars(g, delta_depth(4, 3, 3)),
                  conv_vars(g, identity_point(4)), conv_vars(g, delta_depth(4, 3, 3)),
                  conv_vars(g, identity_point(4)), conv_vars(g, identity_point(4)),
                  conv_vars(g, identity_point(4))};
  DsaIntermediates probe;
  const Tensor out = dsa_forward(g.constant(x), p, &probe).value();
  // Q = K = x; W_c = sigmoid(relu(mean_c)); out = W_c * x^2 + x.
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += x[c * 4 + i] / 4.0;
    const double w = 1.0 / (1.0 + std::exp(-std::max(mean, 0.0)));
    EXPECT_NEAR(probe.weights[c], w, 1e-15);
    for (std::size_t i = 0; i < 4; ++i) {
      const double v = x[c * 4 + i];
      EXPECT_NEAR(out[c * 4 + i], w * v * v + v, 1e-14);
    }
  }
}

TEST(Dsa, AttentionWeightsStrictlyInsideUnitInterval) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModelConfig cfg{8, 1, 3, 3, 2, 4};
    Graph g;
    const NetworkVars nv = bind_parameters(g, init_params(cfg, seed), cfg);
    DsaIntermediates probe;
    dsa_forward(g.constant(random_tensor({2, 8, 5, 4}, seed + 10, -3, 3)), nv.fibs[0].dsa, &probe);
    for (double v : probe.weights.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Dsa, ChannelMismatchIsDimensionError) {
  Graph g;
  const DsaVars p = zero_dsa(g, 4, 1);
  EXPECT_THROW(dsa_forward(g.constant(Tensor({1, 8, 2, 2})), p), DimensionError);
}

// ---------------------------------------------------------------------------
// Local detail attention

TEST(Ldam, IdentityQuarterPassesThrough) {
  const ModelConfig cfg{8, 1, 3, 5, 4, 4};
  Graph g;
  const NetworkVars nv = bind_parameters(g, init_params(cfg, 9), cfg);
  const Tensor x = random_tensor({1, 8, 6, 6}, 8);
  LdamIntermediates probe;
  const Tensor y = ldam_forward(g.constant(x), nv.fibs[0].ldam, &probe).value();
  EXPECT_EQ(ops::slice_channels(y, 6, 2), ops::slice_channels(x, 6, 2));
  EXPECT_EQ(probe.identity_out, probe.identity_in);
}

TEST(Ldam, DeltaKernelsGiveIdentity) {
  Graph g;
  const LdamVars p{conv_vars(g, delta_depth(2, 3, 3)), conv_vars(g, delta_depth(2, 1, 7)),
                   conv_vars(g, delta_depth(2, 7, 1))};
  const Tensor x = random_tensor({1, 8, 5, 6}, 3);
  EXPECT_EQ(ldam_forward(g.constant(x), p).value(), x);
}

TEST(Ldam, OnesKernelsMatchReflectSummation) {
  const Tensor x = random_tensor({1, 4, 3, 3}, 12);
  Graph g;
  const LdamVars p{conv_vars(g, Tensor({1, 1, 3, 3}, 1.0)), conv_vars(g, Tensor({1, 1, 1, 3}, 1.0)),
                   conv_vars(g, Tensor({1, 1, 3, 1}, 1.0))};
  const Tensor y = ldam_forward(g.constant(x), p).value();
  auto refl = [](long i) { return static_cast<std::size_t>(i < 0 ? -i : (i > 2 ? 4 - i : i)); };
  for (long r = 0; r < 3; ++r) {
    for (long c = 0; c < 3; ++c) {
      double square = 0.0, row = 0.0, col = 0.0;
      for (long a = -1; a <= 1; ++a) {
        for (long b = -1; b <= 1; ++b) square += x.at(0, 0, refl(r + a), refl(c + b));
        row += x.at(0, 1, static_cast<std::size_t>(r), refl(c + a));
        col += x.at(0, 2, refl(r + a), static_cast<std::size_t>(c));
      }
      const auto rr = static_cast<std::size_t>(r);
      const auto cc = static_cast<std::size_t>(c);
      EXPECT_NEAR(y.at(0, 0, rr, cc), square, 1e-14);
      EXPECT_NEAR(y.at(0, 1, rr, cc), row, 1e-14);
      EXPECT_NEAR(y.at(0, 2, rr, cc), col, 1e-14);
      EXPECT_EQ(y.at(0, 3, rr, cc), x.at(0, 3, rr, cc));
    }
  }
}

TEST(Ldam, RejectsChannelsNotDivisibleByFour) {
  Graph g;
  const LdamVars p{conv_vars(g, delta_depth(1, 3, 3)), conv_vars(g, delta_depth(1, 1, 3)),
                   conv_vars(g, delta_depth(1, 3, 1))};
  EXPECT_THROW(ldam_forward(g.constant(Tensor({1, 6, 3, 3})), p), ConfigError);
}

// ---------------------------------------------------------------------------
// Feed-forward network

TEST(Ffn, ZeroSpatialWeightsGiveConstantField) {
  Graph g;
  Tensor b({1, 4, 1, 1}, {0.3, -0.5, 1.0, 2.0});
  const FfnVars p{{g.parameter(Tensor({4, 4, 3, 3})), g.parameter(b)},
                  {g.parameter(random_tensor({4, 4, 1, 1}, 2)), g.parameter(random_tensor({1, 4, 1, 1}, 3))}};
  const Tensor y = ffn_forward(g.constant(random_tensor({1, 4, 5, 5}, 4)), p).value();
  const Tensor expected =
      ops::fully_connected(ops::activation(Activation::gelu, b), p.point.weight.value(), p.point.bias.value());
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(y[c * 25 + i], expected[c], 1e-14);
}

TEST(Ffn, IdentityConvsGiveGelu) {
  Graph g;
  Tensor spatial({3, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) spatial.at(c, c, 1, 1) = 1.0;
  const FfnVars p{conv_vars(g, spatial), conv_vars(g, identity_point(3))};
  const Tensor x = random_tensor({1, 3, 4, 4}, 7);
  const Tensor y = ffn_forward(g.constant(x), p).value();
  EXPECT_LT(max_abs_diff(y, ops::activation(Activation::gelu, x)), 1e-15);
}

TEST(Ffn, PreservesShape) {
  const ModelConfig cfg{8, 1, 3, 3, 4, 4};
  Graph g;
  const NetworkVars nv = bind_parameters(g, init_params(cfg, 1), cfg);
  EXPECT_EQ(ffn_forward(g.constant(random_tensor({1, 8, 5, 7}, 1)), nv.fibs[0].ffn).shape(), (Shape{1, 8, 5, 7}));
}

// ---------------------------------------------------------------------------
// HAB / FIB

TEST(Fib, ZeroMergeAndFfnGiveIdentity) {
  const ModelConfig cfg{8, 1, 3, 3, 4, 4};
  ParameterSet ps = init_params(cfg, 2);
  for (auto& e : ps) {
    if (e.name.find(".merge.") != std::string::npos || e.name.find(".ffn.") != std::string::npos) {
      e.value = Tensor(e.value.shape());
    }
  }
  Graph g;
  const NetworkVars nv = bind_parameters(g, ps, cfg);
  const Tensor x = random_tensor({1, 8, 4, 4}, 3);
  EXPECT_EQ(fib_forward(g.constant(x), nv.fibs[0]).value(), x);
}

TEST(Fib, PreservesShapeAcrossConfigs) {
  std::uint64_t seed = 0;
  for (std::size_t c : {4u, 8u, 12u}) {
    for (std::size_t kb : {1u, 5u, 11u}) {
      const ModelConfig cfg{c, 1, 3, kb, 2, 4};
      if (c % cfg.fc_reduction != 0) continue;
      Graph g;
      const NetworkVars nv = bind_parameters(g, init_params(cfg, seed), cfg);
      const Shape s{1, c, 3 + seed % 3, 4};
      EXPECT_EQ(fib_forward(g.constant(random_tensor(s, ++seed)), nv.fibs[0]).shape(), s);
    }
  }
}

// Sequential application of the block equations written against the pure kernels.
TEST(Fib, MatchesHandComposedEquations) {
  const ModelConfig cfg{4, 1, 3, 3, 2, 4};
  const ParameterSet ps = init_params(cfg, 17);
  auto P = [&](const std::string& n) { return ps.get("fib0." + n); };
  auto conv = [&](const Tensor& x, const std::string& n) {
    const Tensor w = P(n + ".weight");
    const Tensor b = P(n + ".bias");
    return ops::conv2d(x, w, &b, 1, Padding::same_reflect(w.shape().h, w.shape().w), x.shape().c / w.shape().c);
  };
  auto add = [](Tensor a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
  };
  const Tensor x = random_tensor({1, 4, 4, 4}, 18);
  const Tensor ln = ops::layer_norm(x, P("norm1.gamma"), P("norm1.beta"), 1e-6);
  const Tensor q = conv(conv(ln, "dsa.query_point"), "dsa.query_depth");
  const Tensor k = conv(conv(ln, "dsa.key_point"), "dsa.key_depth");
  const Tensor hid = ops::activation(
      Activation::relu, ops::fully_connected(ops::global_avg_pool(q), P("dsa.fc1.weight"), P("dsa.fc1.bias")));
  const Tensor w = ops::activation(Activation::sigmoid, ops::fully_connected(hid, P("dsa.fc2.weight"), P("dsa.fc2.bias")));
  Tensor gk = ops::channel_scale(q, w);
  for (std::size_t i = 0; i < gk.size(); ++i) gk[i] *= k[i];
  const Tensor dsa = add(conv(gk, "dsa.out"), q);
  const Tensor sq = conv(ops::slice_channels(ln, 0, 1), "ldam.square");
  const Tensor row = conv(ops::slice_channels(ln, 1, 1), "ldam.row");
  const Tensor col = conv(ops::slice_channels(ln, 2, 1), "ldam.column");
  const Tensor id = ops::slice_channels(ln, 3, 1);
  const Tensor ldam = ops::concat_channels({&sq, &row, &col, &id});
  const Tensor mid = add(conv(ops::concat_channels({&dsa, &ldam}), "merge"), x);
  const Tensor ln2 = ops::layer_norm(mid, P("norm2.gamma"), P("norm2.beta"), 1e-6);
  const Tensor expected = add(conv(ops::activation(Activation::gelu, conv(ln2, "ffn.spatial")), "ffn.point"), mid);

  Graph g;
  const NetworkVars nv = bind_parameters(g, ps, cfg);
  EXPECT_LT(max_abs_diff(fib_forward(g.constant(x), nv.fibs[0]).value(), expected), 1e-13);
}

// ---------------------------------------------------------------------------
// Full network

TEST(Network, OutputShapeEqualsInputShape) {
  const ModelConfig cfg = ModelConfig::desk();
  const ParameterSet ps = init_params(cfg, 1);
  EXPECT_EQ(restore(random_tensor({1, 3, 64, 64}, 2, 0, 1), ps, cfg).shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(restore(random_tensor({1, 3, 13, 10}, 3, 0, 1), ps, cfg).shape(), (Shape{1, 3, 13, 10}));
  const NetworkTrace t = run_network(random_tensor({2, 3, 16, 24}, 4, 0, 1), ps, cfg);
  EXPECT_EQ(t.shallow.shape(), (Shape{2, 16, 4, 6}));
  EXPECT_EQ(t.fib_outputs.size(), cfg.num_fibs);
  EXPECT_EQ(t.restored.shape(), (Shape{2, 3, 16, 24}));
}

TEST(Network, ZeroParametersGiveTailBiasImage) {
  const ModelConfig cfg = ModelConfig::tiny();
  ParameterSet ps = zero_params(cfg);
  Tensor& bias = ps.get("tail.bias");
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 0.01 * static_cast<double>(i);
  const Tensor out = restore(random_tensor({1, 3, 16, 12}, 5, 0, 1), ps, cfg);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 12; ++x) EXPECT_EQ(out.at(0, c, y, x), bias[c * 16 + (y % 4) * 4 + x % 4]);
}

TEST(Network, DeterministicForFixedSeed) {
  const ModelConfig cfg = ModelConfig::desk();
  const Tensor img = random_tensor({1, 3, 32, 32}, 6, 0, 1);
  EXPECT_EQ(restore(img, init_params(cfg, 7), cfg), restore(img, init_params(cfg, 7), cfg));
  EXPECT_NE(init_params(cfg, 7), init_params(cfg, 8));
}

TEST(Network, RejectsWrongChannelCount) {
  const ModelConfig cfg = ModelConfig::tiny();
  EXPECT_THROW(restore(Tensor({1, 4, 8, 8}), init_params(cfg, 0), cfg), DimensionError);
}

TEST(Network, GradientMatchesFiniteDifferencesOnSubset) {
  const ModelConfig cfg = ModelConfig::tiny();
  const ParameterSet ps = init_params(cfg, 21);
  const Tensor img = random_tensor({1, 3, 16, 16}, 22, 0, 1);
  const Tensor proj = random_tensor({1, 3, 16, 16}, 23);
  Graph g;
  const NetworkVars nv = bind_parameters(g, ps, cfg);
  const GradientMap grads = g.backward(weighted_sum(simpleir_forward(g.constant(img), nv, cfg).restored, proj));
  double worst = 0.0;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    const Tensor& analytic = grads.at(nv.leaves[pi]);
    const std::size_t stride = std::max<std::size_t>(1, ps[pi].value.size() / 7);
    for (std::size_t e = 0; e < ps[pi].value.size(); e += stride) {
      auto eval = [&](double delta) {
        ParameterSet probe = ps;
        probe[pi].value[e] += delta;
        Graph h(false);
        const NetworkVars pv = bind_parameters(h, probe, cfg);
        return weighted_sum(simpleir_forward(h.constant(img), pv, cfg).restored, proj).value().item();
      };
      const double numeric = (eval(1e-5) - eval(-1e-5)) / 2e-5;
      const double denom = std::max({std::abs(numeric), std::abs(analytic[e]), 1e-4});
      worst = std::max(worst, std::abs(numeric - analytic[e]) / denom);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

// ---------------------------------------------------------------------------
// Parameter accounting

TEST(Params, CountMatchesEnumeration) {
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    ModelConfig cfg;
    cfg.fc_reduction = 1 + rng.uniform_int(4);
    cfg.channels = 4 * cfg.fc_reduction * (1 + rng.uniform_int(4));
    if (cfg.channels % 4 != 0) cfg.channels *= 4;
    cfg.num_fibs = rng.uniform_int(5);
    cfg.square_kernel = 1 + 2 * rng.uniform_int(3);
    cfg.band_kernel = 1 + 2 * rng.uniform_int(6);
    std::size_t enumerated = 0;
    for (const auto& d : declare_parameters(cfg)) enumerated += d.shape.numel();
    EXPECT_EQ(param_count(cfg), enumerated);
    EXPECT_EQ(param_count(cfg), init_params(cfg, 1).element_count());
  }
}

TEST(Params, ZeroBlocksLeavesHeadAndTail) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.num_fibs = 0;
  const ParameterSet ps = init_params(cfg, 0);
  ASSERT_EQ(ps.size(), 4u);
  EXPECT_EQ(param_count(cfg), ps.get("head.weight").size() + ps.get("head.bias").size() +
                                  ps.get("tail.weight").size() + ps.get("tail.bias").size());
}

TEST(Params, DepthIsLinear) {
  ModelConfig a = ModelConfig::desk();
  ModelConfig b = a;
  b.num_fibs = 2 * a.num_fibs;
  ModelConfig one = a;
  one.num_fibs = 1;
  ModelConfig none = a;
  none.num_fibs = 0;
  const std::size_t per_fib = param_count(one) - param_count(none);
  EXPECT_EQ(param_count(b) - param_count(a), a.num_fibs * per_fib);
}

TEST(Params, PaperPresetNearReportedSize) {
  const std::size_t n = param_count(ModelConfig::paper());
  EXPECT_GE(n, 3'910'000u);
  EXPECT_LE(n, 5'290'000u);
  EXPECT_EQ(search_parameter_budget(4'600'000), ModelConfig::paper());
}

TEST(Params, InvalidConfigsRejected) {
  EXPECT_THROW(param_count(ModelConfig{6, 1, 3, 3, 2, 4}), ConfigError);
  EXPECT_THROW(param_count(ModelConfig{8, 1, 3, 3, 3, 4}), ConfigError);
  EXPECT_THROW(param_count(ModelConfig{8, 1, 2, 3, 4, 4}), ConfigError);
  EXPECT_THROW(param_count(ModelConfig{8, 1, 3, 4, 4, 4}), ConfigError);
  EXPECT_THROW(param_count(ModelConfig{8, 1, 3, 3, 4, 2}), ConfigError);
  EXPECT_THROW(ModelConfig::preset("huge"), ConfigError);
}

TEST(Params, InitIsDeterministicAndFloatRepresentable) {
  const ParameterSet a = init_params(ModelConfig::tiny(), 5);
  EXPECT_EQ(a, init_params(ModelConfig::tiny(), 5));
  for (const auto& e : a) EXPECT_EQ(round_to_float(e.value), e.value);
  EXPECT_EQ(a.get("fib1.norm2.gamma")[0], 1.0);
}

}  // namespace
}  // namespace simpleir
