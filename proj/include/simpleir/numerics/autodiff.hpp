#pragma once

// Tape-based reverse-mode differentiation. A Graph records every operation
// applied to its Vars in execution order; backward() walks the tape in reverse.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simpleir/numerics/errors.hpp"
#include "simpleir/numerics/fft.hpp"
#include "simpleir/numerics/ops.hpp"
#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

class Graph;

/// Handle to a value recorded in a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradients of a scalar with respect to every node that required one.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  bool contains(const Var& v) const { return v.id < grads_.size() && !grads_[v.id].empty(); }

  const Tensor& at(const Var& v) const {
    if (!contains(v)) throw ContractError("no gradient recorded for node " + std::to_string(v.id));
    return grads_[v.id];
  }

 private:
  std::vector<Tensor> grads_;
};

class Graph {
 public:
  using Forward = std::function<Tensor(const Graph&)>;
  /// Returns one gradient per parent; entries for parents with needs[i] == false may be empty.
  using Backward =
      std::function<std::vector<Tensor>(const Graph&, const Tensor& grad_out, std::span<const bool> needs)>;

  /// With record == false no backward closures are kept (inference mode).
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value) { return leaf(std::move(value), false, "constant"); }
  Var parameter(Tensor value, std::string name = "parameter") {
    return leaf(std::move(value), record_, std::move(name));
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }

  /// Records the result of `forward` applied to the parents' cached values.
  Var apply(std::string op, std::vector<std::size_t> parents, Forward forward, Backward backward) {
    Tensor v = forward(*this);
    require_finite(v, op + " (node " + std::to_string(nodes_.size()) + ")");
    Node node;
    node.value = std::move(v);
    node.op = std::move(op);
    if (record_) {
      for (std::size_t p : parents) node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
      node.parents = std::move(parents);
      node.forward = std::move(forward);
      if (node.requires_grad) node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  /// Reverse sweep from a scalar node. Gradients accumulate by summation.
  GradientMap backward(const Var& loss) const {
    if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
    if (!record_) throw ContractError("backward: graph was built without recording");
    if (value(loss.id).size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + value(loss.id).shape().str());
    }
    std::vector<Tensor> grads(nodes_.size());
    grads[loss.id] = Tensor(value(loss.id).shape(), 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (grads[i].empty()) continue;
      if (!all_finite(grads[i])) {
        throw NumericError("non-finite gradient at node " + std::to_string(i) + " (" + node.op + ")");
      }
      if (!node.backward) continue;
      std::unique_ptr<bool[]> needs(new bool[node.parents.size()]);
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        needs[k] = nodes_[node.parents[k]].requires_grad;
      }
      std::vector<Tensor> pg =
          node.backward(*this, grads[i], std::span<const bool>(needs.get(), node.parents.size()));
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        if (!needs[k] || pg[k].empty()) continue;
        Tensor& acc = grads[node.parents[k]];
        if (acc.empty()) {
          acc = std::move(pg[k]);
        } else {
          for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += pg[k][e];
        }
      }
    }
    return GradientMap(std::move(grads));
  }

  /// Re-evaluates every recorded node from its parents; true when all values match bit-exactly.
  bool replay_matches() const {
    for (const Node& node : nodes_) {
      if (!node.forward) continue;
      if (!(node.forward(*this) == node.value)) return false;
    }
    return true;
  }

 private:
  struct Node {
    Tensor value;
    std::string op;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    Forward forward;
    Backward backward;
  };

  Var leaf(Tensor value, bool requires_grad, std::string name) {
    require_finite(value, name);
    Node node;
    node.value = std::move(value);
    node.op = std::move(name);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

namespace detail {

inline Graph& same_graph(const Var& a, const Var& b) {
  if (a.graph != b.graph || a.graph == nullptr) throw ContractError("operands from different graphs");
  return *a.graph;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// differentiable operations

inline Var add(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  return g.apply(
      "add", {a.id, b.id},
      [a = a.id, b = b.id](const Graph& gr) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        require_same_shape(x, y, "add");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
        return out;
      },
      [](const Graph&, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{go, go};
      });
}

inline Var sub(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  return g.apply(
      "sub", {a.id, b.id},
      [a = a.id, b = b.id](const Graph& gr) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        require_same_shape(x, y, "sub");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
        return out;
      },
      [](const Graph&, const Tensor& go, std::span<const bool>) {
        Tensor neg = go;
        for (double& v : neg.data()) v = -v;
        return std::vector<Tensor>{go, std::move(neg)};
      });
}

/// Elementwise product of equal-shape tensors.
inline Var mul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  return g.apply(
      "mul", {a.id, b.id},
      [a = a.id, b = b.id](const Graph& gr) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        require_same_shape(x, y, "mul");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
        return out;
      },
      [a = a.id, b = b.id](const Graph& gr, const Tensor& go, std::span<const bool> needs) {
        std::vector<Tensor> r(2);
        if (needs[0]) {
          r[0] = go;
          const Tensor& y = gr.value(b);
          for (std::size_t i = 0; i < go.size(); ++i) r[0][i] *= y[i];
        }
        if (needs[1]) {
          r[1] = go;
          const Tensor& x = gr.value(a);
          for (std::size_t i = 0; i < go.size(); ++i) r[1][i] *= x[i];
        }
        return r;
      });
}

inline Var scale(const Var& x, double factor) {
  return x.graph->apply(
      "scale", {x.id},
      [x = x.id, factor](const Graph& gr) {
        Tensor out = gr.value(x);
        for (double& v : out.data()) v *= factor;
        return out;
      },
      [factor](const Graph&, const Tensor& go, std::span<const bool>) {
        Tensor gx = go;
        for (double& v : gx.data()) v *= factor;
        return std::vector<Tensor>{std::move(gx)};
      });
}

/// Broadcast multiply by a per-(n, c) weight of shape (n, c, 1, 1).
inline Var channel_scale(const Var& x, const Var& s) {
  Graph& g = detail::same_graph(x, s);
  return g.apply(
      "channel_scale", {x.id, s.id},
      [x = x.id, s = s.id](const Graph& gr) { return ops::channel_scale(gr.value(x), gr.value(s)); },
      [x = x.id, s = s.id](const Graph& gr, const Tensor& go, std::span<const bool> needs) {
        std::vector<Tensor> r(2);
        const Tensor& xv = gr.value(x);
        const Tensor& sv = gr.value(s);
        const Shape xs = xv.shape();
        if (needs[0]) r[0] = ops::channel_scale(go, sv);
        if (needs[1]) {
          r[1] = Tensor(sv.shape());
          for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
            double acc = 0.0;
            for (std::size_t i = 0; i < xs.plane(); ++i) {
              acc += go[nc * xs.plane() + i] * xv[nc * xs.plane() + i];
            }
            r[1][nc] = acc;
          }
        }
        return r;
      });
}

inline Var pad2d(const Var& x, const Padding& p) {
  return x.graph->apply(
      "pad2d", {x.id}, [x = x.id, p](const Graph& gr) { return ops::pad2d(gr.value(x), p); },
      [x = x.id, p](const Graph& gr, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::pad2d_backward(go, gr.value(x).shape(), p)};
      });
}

inline Var crop2d(const Var& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  return x.graph->apply(
      "crop2d", {x.id},
      [=, x = x.id](const Graph& gr) { return ops::crop2d(gr.value(x), top, left, h, w); },
      [=, x = x.id](const Graph& gr, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::crop2d_backward(go, gr.value(x).shape(), top, left)};
      });
}

/// 2D convolution; weight is (c_out, c_in / groups, kh, kw).
inline Var conv2d(const Var& x, const Var& weight, const std::optional<Var>& bias,
                  std::size_t stride = 1, const Padding& padding = Padding::none(),
                  std::size_t groups = 1) {
  Graph& g = detail::same_graph(x, weight);
  const Var padded = padding.is_none() ? x : pad2d(x, padding);
  std::vector<std::size_t> parents{padded.id, weight.id};
  if (bias) {
    detail::same_graph(x, *bias);
    parents.push_back(bias->id);
  }
  const std::size_t bias_id = bias ? bias->id : 0;
  const bool has_bias = bias.has_value();
  return g.apply(
      "conv2d", std::move(parents),
      [xp = padded.id, w = weight.id, bias_id, has_bias, stride, groups](const Graph& gr) {
        return ops::conv2d_valid(gr.value(xp), gr.value(w), has_bias ? &gr.value(bias_id) : nullptr,
                                 stride, groups);
      },
      [xp = padded.id, w = weight.id, bias_id, has_bias, stride, groups](
          const Graph& gr, const Tensor& go, std::span<const bool> needs) {
        std::vector<Tensor> r(has_bias ? 3 : 2);
        if (needs[0]) {
          r[0] = ops::conv2d_valid_backward_input(go, gr.value(w), gr.value(xp).shape(), stride,
                                                  groups);
        }
        if (needs[1]) {
          r[1] = ops::conv2d_valid_backward_weight(go, gr.value(xp), gr.value(w).shape(), stride,
                                                   groups);
        }
        if (has_bias && needs[2]) r[2] = ops::channel_sum(go, gr.value(bias_id).shape());
        return r;
      });
}

inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6) {
  Graph& g = detail::same_graph(x, gamma);
  detail::same_graph(x, beta);
  return g.apply(
      "layer_norm", {x.id, gamma.id, beta.id},
      [x = x.id, gm = gamma.id, bt = beta.id, eps](const Graph& gr) {
        return ops::layer_norm(gr.value(x), gr.value(gm), gr.value(bt), eps);
      },
      [x = x.id, gm = gamma.id, bt = beta.id, eps](const Graph& gr, const Tensor& go,
                                                   std::span<const bool>) {
        ops::LayerNormCache cache;
        ops::layer_norm(gr.value(x), gr.value(gm), gr.value(bt), eps, &cache);
        ops::LayerNormGrads lg = ops::layer_norm_backward(go, gr.value(gm), cache);
        return std::vector<Tensor>{std::move(lg.x), std::move(lg.gamma), std::move(lg.beta)};
      });
}

inline Var activation(Activation kind, const Var& x) {
  static constexpr const char* names[] = {"relu", "gelu", "sigmoid"};
  return x.graph->apply(
      names[static_cast<int>(kind)], {x.id},
      [x = x.id, kind](const Graph& gr) { return ops::activation(kind, gr.value(x)); },
      [x = x.id, kind](const Graph& gr, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::activation_backward(kind, go, gr.value(x))};
      });
}

inline Var global_avg_pool(const Var& x) {
  return x.graph->apply(
      "global_avg_pool", {x.id}, [x = x.id](const Graph& gr) { return ops::global_avg_pool(gr.value(x)); },
      [x = x.id](const Graph& gr, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::global_avg_pool_backward(go, gr.value(x).shape())};
      });
}

inline Var fully_connected(const Var& x, const Var& weight, const Var& bias) {
  Graph& g = detail::same_graph(x, weight);
  detail::same_graph(x, bias);
  return g.apply(
      "fully_connected", {x.id, weight.id, bias.id},
      [x = x.id, w = weight.id, b = bias.id](const Graph& gr) {
        return ops::fully_connected(gr.value(x), gr.value(w), gr.value(b));
      },
      [x = x.id, w = weight.id, b = bias.id](const Graph& gr, const Tensor& go, std::span<const bool>) {
        ops::FullyConnectedGrads fg = ops::fully_connected_backward(go, gr.value(x), gr.value(w), gr.value(b));
        return std::vector<Tensor>{std::move(fg.x), std::move(fg.weight), std::move(fg.bias)};
      });
}

inline Var pixel_shuffle(const Var& x, std::size_t r) {
  return x.graph->apply(
      "pixel_shuffle", {x.id}, [x = x.id, r](const Graph& gr) { return ops::pixel_shuffle(gr.value(x), r); },
      [r](const Graph&, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::pixel_unshuffle(go, r)};
      });
}

inline Var pixel_unshuffle(const Var& x, std::size_t r) {
  return x.graph->apply(
      "pixel_unshuffle", {x.id},
      [x = x.id, r](const Graph& gr) { return ops::pixel_unshuffle(gr.value(x), r); },
      [r](const Graph&, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{ops::pixel_shuffle(go, r)};
      });
}

inline Var slice_channels(const Var& x, std::size_t begin, std::size_t count) {
  return x.graph->apply(
      "slice_channels", {x.id},
      [x = x.id, begin, count](const Graph& gr) { return ops::slice_channels(gr.value(x), begin, count); },
      [x = x.id, begin, count](const Graph& gr, const Tensor& go, std::span<const bool>) {
        const Shape s = gr.value(x).shape();
        Tensor gx(s);
        for (std::size_t n = 0; n < s.n; ++n) {
          const double* src = go.data().data() + n * count * s.plane();
          std::copy(src, src + count * s.plane(), gx.data().data() + (n * s.c + begin) * s.plane());
        }
        return std::vector<Tensor>{std::move(gx)};
      });
}

inline Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  Graph& g = *parts.front().graph;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ContractError("operands from different graphs");
    ids.push_back(p.id);
  }
  return g.apply(
      "concat_channels", ids,
      [ids](const Graph& gr) {
        std::vector<const Tensor*> ts;
        for (std::size_t id : ids) ts.push_back(&gr.value(id));
        return ops::concat_channels(ts);
      },
      [ids](const Graph& gr, const Tensor& go, std::span<const bool>) {
        std::vector<Tensor> r;
        std::size_t offset = 0;
        for (std::size_t id : ids) {
          const std::size_t c = gr.value(id).shape().c;
          r.push_back(ops::slice_channels(go, offset, c));
          offset += c;
        }
        return r;
      });
}

/// Sum of every element as a (1, 1, 1, 1) scalar.
inline Var sum(const Var& x) {
  return x.graph->apply(
      "sum", {x.id},
      [x = x.id](const Graph& gr) {
        double acc = 0.0;
        for (double v : gr.value(x).data()) acc += v;
        return Tensor::scalar(acc);
      },
      [x = x.id](const Graph& gr, const Tensor& go, std::span<const bool>) {
        return std::vector<Tensor>{Tensor(gr.value(x).shape(), go[0])};
      });
}

/// Scalar sum(x * weights) against a constant weight tensor.
inline Var weighted_sum(const Var& x, Tensor weights) {
  return x.graph->apply(
      "weighted_sum", {x.id},
      [x = x.id, weights](const Graph& gr) {
        const Tensor& v = gr.value(x);
        require_same_shape(v, weights, "weighted_sum");
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * weights[i];
        return Tensor::scalar(acc);
      },
      [weights](const Graph&, const Tensor& go, std::span<const bool>) {
        Tensor gx = weights;
        for (double& v : gx.data()) v *= go[0];
        return std::vector<Tensor>{std::move(gx)};
      });
}

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Mean absolute difference; subgradient sign(0) = 0.
inline Var l1_mean(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  return g.apply(
      "l1_mean", {a.id, b.id},
      [a = a.id, b = b.id](const Graph& gr) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        require_same_shape(x, y, "l1_mean");
        if (x.empty()) throw DimensionError("l1_mean: empty tensors");
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
        return Tensor::scalar(acc / static_cast<double>(x.size()));
      },
      [a = a.id, b = b.id](const Graph& gr, const Tensor& go, std::span<const bool> needs) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        Tensor gx(x.shape());
        const double k = go[0] / static_cast<double>(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = k * sign_or_zero(x[i] - y[i]);
        std::vector<Tensor> r(2);
        if (needs[1]) {
          r[1] = gx;
          for (double& v : r[1].data()) v = -v;
        }
        if (needs[0]) r[0] = std::move(gx);
        return r;
      });
}

/// Mean over spectral bins of |Re(F(a) - F(b))| + |Im(F(a) - F(b))|, F the unnormalized 2D DFT.
inline Var frequency_l1_mean(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  return g.apply(
      "frequency_l1_mean", {a.id, b.id},
      [a = a.id, b = b.id](const Graph& gr) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        require_same_shape(x, y, "frequency_l1_mean");
        if (x.empty()) throw DimensionError("frequency_l1_mean: empty tensors");
        return Tensor::scalar(complex_l1(fft2(x), fft2(y)) / static_cast<double>(x.size()));
      },
      [a = a.id, b = b.id](const Graph& gr, const Tensor& go, std::span<const bool> needs) {
        const Tensor& x = gr.value(a);
        const Tensor& y = gr.value(b);
        const ComplexTensor fx = fft2(x);
        const ComplexTensor fy = fft2(y);
        // d/dx of sum |Re D_k| + |Im D_k| is Re(unnormalized inverse DFT of sign(Re D) + i sign(Im D)).
        ComplexTensor s(x.shape());
        for (std::size_t i = 0; i < s.data.size(); ++i) {
          const Complex d = fx.data[i] - fy.data[i];
          s.data[i] = Complex(sign_or_zero(d.real()), sign_or_zero(d.imag()));
        }
        const ComplexTensor back = ifft2(std::move(s));
        const double k = go[0] * static_cast<double>(x.shape().plane()) / static_cast<double>(x.size());
        Tensor gx(x.shape());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = k * back.data[i].real();
        std::vector<Tensor> r(2);
        if (needs[1]) {
          r[1] = gx;
          for (double& v : r[1].data()) v = -v;
        }
        if (needs[0]) r[0] = std::move(gx);
        return r;
      });
}

// ---------------------------------------------------------------------------
// finite-difference oracle

/// Central-difference gradient of a scalar function at x.
inline Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double step = 1e-5) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// Largest |a - b| / max(|a|, |b|, floor) over all elements. The floor keeps
/// round-off on vanishing gradients (about 1e-11 at step 1e-5) from reading as relative error.
inline double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-4) {
  require_same_shape(analytic, numeric, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace simpleir
