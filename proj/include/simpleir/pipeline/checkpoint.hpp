#pragma once

// Little-endian binary checkpoint: "SIRK", u32 version, config block, state block, named
// tensors stored as 32-bit floats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "simpleir/data/files.hpp"
#include "simpleir/data/kvtext.hpp"
#include "simpleir/pipeline/train.hpp"

namespace simpleir {

inline constexpr char kCheckpointMagic[4] = {'S', 'I', 'R', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kConfigFieldCount = 6;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { out_ += s; }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return raw(u32()); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  const Shape s = t.shape();
  w.u32(4);
  for (std::size_t d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f32(static_cast<float>(v));
}

inline std::pair<std::string, Tensor> read_tensor(ByteReader& r) {
  std::string name = r.str();
  const std::uint32_t rank = r.u32();
  if (rank != 4) throw FormatError("checkpoint: tensor '" + name + "' has unsupported rank " + std::to_string(rank));
  const Shape s{r.u32(), r.u32(), r.u32(), r.u32()};
  // Checked before allocating so corrupt dimensions cannot request huge buffers.
  if (double(s.n) * double(s.c) * double(s.h) * double(s.w) > double(r.remaining() / 4)) {
    throw FormatError("checkpoint: tensor '" + name + "' exceeds the file");
  }
  Tensor t(s);
  for (double& v : t.data()) v = static_cast<double>(r.f32());
  return {std::move(name), std::move(t)};
}

inline std::string flatten_lines(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), '\n', ';');
  return out;
}

inline std::string restore_lines(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), ';', '\n');
  return out;
}

inline std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? std::string(1, sep) : "") + items[i];
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s.find(sep, start)) != std::string::npos; start = pos + 1) out.push_back(s.substr(start, pos - start));
  out.push_back(s.substr(start));
  return out;
}

inline KvText state_block(const TrainState& st) {
  KvText kv;
  kv.set("iteration", st.iteration);
  kv.set("stage", st.stage);
  kv.set("stage_iteration", st.stage_iteration);
  kv.set("adam.step", st.opt.step);
  kv.set("rng", st.rng.state());
  kv.set("loss_stats", flatten_lines(st.loss_stats.serialize()));
  std::vector<std::string> order;
  for (std::size_t i : st.order) order.push_back(std::to_string(i));
  kv.set("order", join(order, ','));
  kv.set("cursor", st.cursor);
  kv.set("archive_digests", join(st.archive_digests, ','));
  put_metrics(kv, st.metrics);
  return kv;
}

inline void apply_state_block(const KvText& kv, TrainState& st) {
  st.iteration = kv.get_uint("iteration");
  st.stage = kv.get_uint("stage");
  st.stage_iteration = kv.get_uint("stage_iteration");
  if (st.stage == 0) throw FormatError("checkpoint: stage must be positive");
  st.opt.step = kv.get_uint("adam.step");
  st.rng.set_state(kv.get("rng"));
  st.loss_stats = LossStats::deserialize(restore_lines(kv.get("loss_stats")));
  st.order.clear();
  for (const std::string& s : split(kv.get("order"), ',')) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw FormatError("checkpoint: malformed roster order");
    }
    st.order.push_back(std::stoull(s));
  }
  st.cursor = kv.get_uint("cursor");
  if (st.cursor > st.order.size()) throw FormatError("checkpoint: roster cursor out of range");
  st.archive_digests = split(kv.get("archive_digests"), ',');
  st.metrics = get_metrics(kv);
}

}  // namespace detail

inline std::string checkpoint_bytes(const TrainState& st) {
  detail::ByteWriter w;
  w.raw(std::string(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  const ModelConfig& c = st.config;
  w.u32(kConfigFieldCount);
  for (std::size_t f : {c.channels, c.num_fibs, c.square_kernel, c.band_kernel, c.fc_reduction, c.down_factor}) {
    w.u32(static_cast<std::uint32_t>(f));
  }
  w.str(detail::state_block(st).str());
  w.u32(static_cast<std::uint32_t>(3 * st.params.size()));
  for (const NamedTensor& p : st.params) detail::write_tensor(w, "param:" + p.name, p.value);
  for (const NamedTensor& m : st.opt.first) detail::write_tensor(w, "adam.m:" + m.name, m.value);
  for (const NamedTensor& v : st.opt.second) detail::write_tensor(w, "adam.v:" + v.name, v.value);
  return w.take();
}

/// Inverse of checkpoint_bytes. Tensors must match the declared parameters of the stored
/// config by name and shape.
inline TrainState checkpoint_from_bytes(const std::string& bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(4) != std::string(kCheckpointMagic, 4)) throw FormatError("checkpoint: bad magic bytes");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  if (r.u32() != kConfigFieldCount) throw FormatError("checkpoint: unexpected config block size");
  TrainState st;
  ModelConfig& c = st.config;
  for (std::size_t* f : {&c.channels, &c.num_fibs, &c.square_kernel, &c.band_kernel, &c.fc_reduction, &c.down_factor}) {
    *f = r.u32();
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid model config: ") + e.what());
  }
  detail::apply_state_block(KvText::parse(r.str()), st);

  const std::vector<ParameterDecl> decls = declare_parameters(c);
  const std::uint32_t count = r.u32();
  if (count != 3 * decls.size()) {
    throw FormatError("checkpoint: " + std::to_string(count) + " tensors, expected " +
                      std::to_string(3 * decls.size()));
  }
  std::vector<NamedTensor> groups[3];
  const char* prefixes[3] = {"param:", "adam.m:", "adam.v:"};
  for (int g = 0; g < 3; ++g) {
    for (const ParameterDecl& d : decls) {
      auto [name, t] = detail::read_tensor(r);
      if (name != prefixes[g] + d.name) {
        throw FormatError("checkpoint: found tensor '" + name + "', expected '" + prefixes[g] + d.name + "'");
      }
      if (t.shape() != d.shape) throw FormatError("checkpoint: tensor '" + name + "' has wrong shape");
      groups[g].push_back({d.name, std::move(t)});
    }
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  st.params = ParameterSet(std::move(groups[0]));
  st.opt.first = ParameterSet(std::move(groups[1]));
  st.opt.second = ParameterSet(std::move(groups[2]));
  return st;
}

inline void save_checkpoint(const fs::path& path, const TrainState& st) { write_file_atomic(path, checkpoint_bytes(st)); }

inline TrainState load_checkpoint(const fs::path& path) { return checkpoint_from_bytes(read_file(path)); }

}  // namespace simpleir
