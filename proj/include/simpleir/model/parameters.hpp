#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "simpleir/model/config.hpp"
#include "simpleir/numerics/random.hpp"
#include "simpleir/numerics/tensor.hpp"

namespace simpleir {

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered, named learnable tensors of one network.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {}

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  const Tensor& get(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e.value;
    }
    throw ContractError("unknown parameter '" + name + "'");
  }
  Tensor& get(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).get(name));
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

enum class InitKind { fan_in_uniform, zeros, ones };

struct ParameterDecl {
  std::string name;
  Shape shape;
  InitKind init = InitKind::fan_in_uniform;
};

namespace detail {

inline void declare_conv(std::vector<ParameterDecl>& out, const std::string& prefix, std::size_t c_out,
                         std::size_t c_in_per_group, std::size_t kh, std::size_t kw) {
  out.push_back({prefix + ".weight", Shape{c_out, c_in_per_group, kh, kw}, InitKind::fan_in_uniform});
  out.push_back({prefix + ".bias", Shape{1, c_out, 1, 1}, InitKind::zeros});
}

inline void declare_norm(std::vector<ParameterDecl>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + ".gamma", Shape{1, c, 1, 1}, InitKind::ones});
  out.push_back({prefix + ".beta", Shape{1, c, 1, 1}, InitKind::zeros});
}

}  // namespace detail

/// Every learnable tensor of the network in its canonical order.
inline std::vector<ParameterDecl> declare_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  const std::size_t q = c / 4;
  const std::size_t hidden = c / cfg.fc_reduction;
  std::vector<ParameterDecl> d;
  detail::declare_conv(d, "head", c, cfg.image_channels(), 3, 3);
  for (std::size_t i = 0; i < cfg.num_fibs; ++i) {
    const std::string p = "fib" + std::to_string(i);
    detail::declare_norm(d, p + ".norm1", c);
    detail::declare_conv(d, p + ".dsa.query_point", c, c, 1, 1);
    detail::declare_conv(d, p + ".dsa.query_depth", c, 1, 3, 3);
    detail::declare_conv(d, p + ".dsa.key_point", c, c, 1, 1);
    detail::declare_conv(d, p + ".dsa.key_depth", c, 1, 3, 3);
    detail::declare_conv(d, p + ".dsa.fc1", hidden, c, 1, 1);
    detail::declare_conv(d, p + ".dsa.fc2", c, hidden, 1, 1);
    detail::declare_conv(d, p + ".dsa.out", c, c, 1, 1);
    detail::declare_conv(d, p + ".ldam.square", q, 1, cfg.square_kernel, cfg.square_kernel);
    detail::declare_conv(d, p + ".ldam.row", q, 1, 1, cfg.band_kernel);
    detail::declare_conv(d, p + ".ldam.column", q, 1, cfg.band_kernel, 1);
    detail::declare_conv(d, p + ".merge", c, 2 * c, 1, 1);
    detail::declare_norm(d, p + ".norm2", c);
    detail::declare_conv(d, p + ".ffn.spatial", c, c, 3, 3);
    detail::declare_conv(d, p + ".ffn.point", c, c, 1, 1);
  }
  detail::declare_conv(d, "tail", cfg.image_channels(), c, 3, 3);
  return d;
}

/// Deterministic initialization: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases and
/// norm shifts zero, norm scales one.
inline ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1417));
  std::vector<NamedTensor> entries;
  for (const ParameterDecl& decl : declare_parameters(cfg)) {
    Tensor t(decl.shape);
    switch (decl.init) {
      case InitKind::zeros:
        break;
      case InitKind::ones:
        for (double& v : t.data()) v = 1.0;
        break;
      case InitKind::fan_in_uniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(decl.shape.c * decl.shape.h * decl.shape.w));
        for (double& v : t.data()) v = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
        break;
      }
    }
    entries.push_back({decl.name, std::move(t)});
  }
  return ParameterSet(std::move(entries));
}

/// Same layout as init_params with every value zero.
inline ParameterSet zero_params(const ModelConfig& cfg) {
  std::vector<NamedTensor> entries;
  for (const ParameterDecl& decl : declare_parameters(cfg)) entries.push_back({decl.name, Tensor(decl.shape)});
  return ParameterSet(std::move(entries));
}

}  // namespace simpleir
