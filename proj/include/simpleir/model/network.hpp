#pragma once

#include <string>
#include <vector>

#include "simpleir/model/blocks.hpp"
#include "simpleir/model/config.hpp"
#include "simpleir/model/parameters.hpp"

namespace simpleir {

/// A ParameterSet placed into a graph: `leaves[i]` holds parameter i, the structured
/// fields alias the same Vars.
struct NetworkVars {
  std::vector<Var> leaves;
  ConvVars head;
  std::vector<FibVars> fibs;
  ConvVars tail;
};

inline NetworkVars bind_parameters(Graph& graph, const ParameterSet& params, const ModelConfig& cfg) {
  const std::vector<ParameterDecl> decls = declare_parameters(cfg);
  if (decls.size() != params.size()) {
    throw ContractError("parameter set has " + std::to_string(params.size()) + " tensors, config declares " +
                        std::to_string(decls.size()));
  }
  NetworkVars nv;
  for (std::size_t i = 0; i < decls.size(); ++i) {
    if (params[i].name != decls[i].name || params[i].value.shape() != decls[i].shape) {
      throw ContractError("parameter " + std::to_string(i) + " '" + params[i].name + "' " +
                          params[i].value.shape().str() + " does not match declaration '" + decls[i].name +
                          "' " + decls[i].shape.str());
    }
    nv.leaves.push_back(graph.parameter(params[i].value, params[i].name));
  }
  std::size_t k = 0;
  auto conv = [&] {
    ConvVars c{nv.leaves[k], nv.leaves[k + 1]};
    k += 2;
    return c;
  };
  auto norm = [&] {
    NormVars n{nv.leaves[k], nv.leaves[k + 1]};
    k += 2;
    return n;
  };
  nv.head = conv();
  for (std::size_t i = 0; i < cfg.num_fibs; ++i) {
    FibVars f;
    f.norm1 = norm();
    f.dsa.query_point = conv();
    f.dsa.query_depth = conv();
    f.dsa.key_point = conv();
    f.dsa.key_depth = conv();
    f.dsa.fc1 = conv();
    f.dsa.fc2 = conv();
    f.dsa.out = conv();
    f.ldam.square = conv();
    f.ldam.row = conv();
    f.ldam.column = conv();
    f.merge = conv();
    f.norm2 = norm();
    f.ffn.spatial = conv();
    f.ffn.point = conv();
    nv.fibs.push_back(f);
  }
  nv.tail = conv();
  return nv;
}

/// Graph handles of the network's named intermediate features.
struct NetworkTraceVars {
  Var shallow;                 ///< X_0 at 1/4 resolution
  std::vector<Var> fib_outputs;
  Var deep;                    ///< X_f
  Var restored;                ///< image-shaped output
};

struct NetworkTrace {
  Tensor shallow;
  std::vector<Tensor> fib_outputs;
  Tensor deep;
  Tensor restored;
};

/// Full restoration path. Inputs whose height or width is not a multiple of the
/// down factor are reflect-padded on the bottom/right and the output is cropped back.
inline NetworkTraceVars simpleir_forward(const Var& image, const NetworkVars& p, const ModelConfig& cfg) {
  const Shape s = image.shape();
  if (s.c != 3) throw DimensionError("simpleir: expected 3 image channels, got " + std::to_string(s.c));
  if (s.h == 0 || s.w == 0) throw DimensionError("simpleir: empty image");
  const std::size_t d = cfg.down_factor;
  const std::size_t ph = (d - s.h % d) % d;
  const std::size_t pw = (d - s.w % d) % d;
  Var x = image;
  if (ph != 0 || pw != 0) x = pad2d(image, Padding{Padding::Mode::reflect, 0, ph, 0, pw});

  NetworkTraceVars trace;
  trace.shallow = same_conv(pixel_unshuffle(x, d), p.head);
  Var feat = trace.shallow;
  for (const FibVars& fib : p.fibs) {
    feat = fib_forward(feat, fib);
    trace.fib_outputs.push_back(feat);
  }
  trace.deep = feat;
  Var out = pixel_shuffle(same_conv(add(trace.deep, trace.shallow), p.tail), d);
  if (ph != 0 || pw != 0) out = crop2d(out, 0, 0, s.h, s.w);
  trace.restored = out;
  return trace;
}

inline NetworkTrace to_trace(const NetworkTraceVars& v) {
  NetworkTrace t{v.shallow.value(), {}, v.deep.value(), v.restored.value()};
  for (const Var& f : v.fib_outputs) t.fib_outputs.push_back(f.value());
  return t;
}

/// Inference-only forward pass returning every traced feature.
inline NetworkTrace run_network(const Tensor& image, const ParameterSet& params, const ModelConfig& cfg) {
  Graph graph(false);
  const NetworkVars nv = bind_parameters(graph, params, cfg);
  return to_trace(simpleir_forward(graph.constant(image), nv, cfg));
}

/// Inference-only forward pass returning the restored image.
inline Tensor restore(const Tensor& image, const ParameterSet& params, const ModelConfig& cfg) {
  Graph graph(false);
  const NetworkVars nv = bind_parameters(graph, params, cfg);
  return simpleir_forward(graph.constant(image), nv, cfg).restored.value();
}

}  // namespace simpleir
