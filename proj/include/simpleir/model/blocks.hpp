#pragma once

// Building blocks of the restoration network, expressed over graph Vars so the same
// code serves training (recording graph) and inference (non-recording graph).

#include <optional>
#include <vector>

#include "simpleir/numerics/autodiff.hpp"

namespace simpleir {

struct ConvVars {
  Var weight;
  Var bias;
};

struct NormVars {
  Var gamma;
  Var beta;
};

struct DsaVars {
  ConvVars query_point, query_depth;
  ConvVars key_point, key_depth;
  ConvVars fc1, fc2;
  ConvVars out;
};

struct LdamVars {
  ConvVars square;  ///< k_s x k_s
  ConvVars row;     ///< 1 x k_b
  ConvVars column;  ///< k_b x 1
};

struct FfnVars {
  ConvVars spatial;  ///< 3x3
  ConvVars point;    ///< 1x1
};

struct FibVars {
  NormVars norm1;
  DsaVars dsa;
  LdamVars ldam;
  ConvVars merge;
  NormVars norm2;
  FfnVars ffn;
};

/// Optional sink for the DualStream attention intermediates.
struct DsaIntermediates {
  Tensor query;         ///< Q
  Tensor key;           ///< K
  Tensor pooled;        ///< q = GAP(Q), (n, c, 1, 1)
  Tensor weights;       ///< W, (n, c, 1, 1), strictly inside (0, 1)
  Tensor modulated;     ///< G = W * Q
  Tensor out;
};

struct LdamIntermediates {
  Tensor square_in, row_in, column_in, identity_in;
  Tensor square_out, row_out, column_out, identity_out;
};

/// Convolution whose padding keeps h x w (reflect), groups inferred from the weight shape.
inline Var same_conv(const Var& x, const ConvVars& p) {
  const Shape w = p.weight.shape();
  const std::size_t groups = x.shape().c / w.c;
  return conv2d(x, p.weight, p.bias, 1, Padding::same_reflect(w.h, w.w), groups);
}

/// Q = DW3x3(PW1x1(x)), K likewise; W = sigmoid(FC2(ReLU(FC1(GAP(Q))))); G = W * Q;
/// out = Conv1x1(G * K) + Q.
inline Var dsa_forward(const Var& x, const DsaVars& p, DsaIntermediates* probe = nullptr) {
  const std::size_t c = p.query_point.weight.shape().n;
  if (x.shape().c != c) {
    throw DimensionError("dsa: expected " + std::to_string(c) + " channels, got " +
                         std::to_string(x.shape().c));
  }
  const Var q = same_conv(same_conv(x, p.query_point), p.query_depth);
  const Var k = same_conv(same_conv(x, p.key_point), p.key_depth);
  const Var pooled = global_avg_pool(q);
  const Var hidden = activation(Activation::relu, fully_connected(pooled, p.fc1.weight, p.fc1.bias));
  const Var weights = activation(Activation::sigmoid, fully_connected(hidden, p.fc2.weight, p.fc2.bias));
  const Var g = channel_scale(q, weights);
  const Var out = add(same_conv(mul(g, k), p.out), q);
  if (probe != nullptr) {
    *probe = DsaIntermediates{q.value(), k.value(), pooled.value(), weights.value(), g.value(), out.value()};
  }
  return out;
}

/// Four-way channel split: square, row-band and column-band depth-wise convolutions plus
/// an identity quarter, concatenated back in input order.
inline Var ldam_forward(const Var& x, const LdamVars& p, LdamIntermediates* probe = nullptr) {
  const std::size_t c = x.shape().c;
  if (c % 4 != 0) throw ConfigError("ldam: channels " + std::to_string(c) + " not divisible by 4");
  const std::size_t q = c / 4;
  const Var x_hw = slice_channels(x, 0, q);
  const Var x_w = slice_channels(x, q, q);
  const Var x_h = slice_channels(x, 2 * q, q);
  const Var x_id = slice_channels(x, 3 * q, q);
  const Var y_hw = same_conv(x_hw, p.square);
  const Var y_w = same_conv(x_w, p.row);
  const Var y_h = same_conv(x_h, p.column);
  if (probe != nullptr) {
    *probe = LdamIntermediates{x_hw.value(), x_w.value(), x_h.value(), x_id.value(),
                               y_hw.value(), y_w.value(), y_h.value(), x_id.value()};
  }
  return concat_channels({y_hw, y_w, y_h, x_id});
}

/// Conv1x1(GELU(Conv3x3(x))).
inline Var ffn_forward(const Var& x, const FfnVars& p) {
  return same_conv(activation(Activation::gelu, same_conv(x, p.spatial)), p.point);
}

/// Conv1x1([DSA(LN(x)); LDAM(LN(x))]) mapping 2C -> C.
inline Var hab_forward(const Var& x, const FibVars& p) {
  const Var normed = layer_norm(x, p.norm1.gamma, p.norm1.beta);
  return same_conv(concat_channels({dsa_forward(normed, p.dsa), ldam_forward(normed, p.ldam)}), p.merge);
}

/// x' = HAB(x) + x; out = FFN(LN(x')) + x'.
inline Var fib_forward(const Var& x, const FibVars& p) {
  const Var mid = add(hab_forward(x, p), x);
  return add(ffn_forward(layer_norm(mid, p.norm2.gamma, p.norm2.beta), p.ffn), mid);
}

}  // namespace simpleir
