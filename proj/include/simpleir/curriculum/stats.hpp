#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simpleir/numerics/errors.hpp"

namespace simpleir {

inline constexpr std::size_t kHistogramBins = 50;
inline constexpr double kHistogramMaxBits = 8.0;

/// Per-sample entropy differences of one dataset with their mean and a fixed-range histogram.
struct EntropyStats {
  std::vector<std::string> ids;
  std::vector<double> values;  ///< aligned with ids, bits
  double mean = 0.0;
  std::vector<double> bin_edges;     ///< kHistogramBins + 1 uniform edges over [0, 8]
  std::vector<std::size_t> counts;   ///< values >= 8 fall into the last bin

  std::size_t size() const { return values.size(); }
};

inline EntropyStats make_entropy_stats(std::vector<std::string> ids, std::vector<double> values) {
  if (ids.size() != values.size()) throw ContractError("entropy stats: ids and values differ in length");
  EntropyStats s;
  s.bin_edges.resize(kHistogramBins + 1);
  for (std::size_t i = 0; i <= kHistogramBins; ++i) s.bin_edges[i] = kHistogramMaxBits * double(i) / kHistogramBins;
  s.counts.assign(kHistogramBins, 0);
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw NumericError("entropy stats: invalid value " + std::to_string(v));
    total += v;
    const auto bin = static_cast<std::size_t>(v / kHistogramMaxBits * kHistogramBins);
    ++s.counts[std::min(bin, kHistogramBins - 1)];
  }
  s.mean = values.empty() ? 0.0 : total / double(values.size());
  s.ids = std::move(ids);
  s.values = std::move(values);
  return s;
}

/// One training-loss observation.
struct LossObservation {
  std::uint64_t iteration = 0;
  std::string sample_id;
  double loss = 0.0;

  bool operator==(const LossObservation&) const = default;
};

/// Trailing window of per-iteration losses. Per-sample scores are the mean loss of each
/// sample inside the window; mu and sigma are the population statistics of those scores.
class LossStats {
 public:
  explicit LossStats(std::uint64_t window = 1000) : window_(window) {
    if (window == 0) throw ConfigError("loss window must be positive");
  }

  void record(std::uint64_t iteration, const std::string& sample_id, double loss) {
    if (!std::isfinite(loss)) throw NumericError("loss stats: non-finite loss for '" + sample_id + "'");
    if (!history_.empty() && iteration <= history_.back().iteration) {
      throw ContractError("loss stats: iterations must increase");
    }
    history_.push_back({iteration, sample_id, loss});
    while (history_.front().iteration + window_ <= iteration) history_.pop_front();
  }

  std::uint64_t window() const { return window_; }
  bool empty() const { return history_.empty(); }
  const std::deque<LossObservation>& history() const { return history_; }

  /// Mean in-window loss per sample, keyed (and therefore ordered) by id.
  std::map<std::string, double> per_sample() const {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const LossObservation& o : history_) {
      auto& [sum, n] = acc[o.sample_id];
      sum += o.loss;
      ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [id, sn] : acc) out[id] = sn.first / double(sn.second);
    return out;
  }

  /// Hex-float lines, one observation each, preceded by the window size.
  std::string serialize() const {
    std::ostringstream os;
    os << "window " << window_ << "\n";
    char buf[64];
    for (const LossObservation& o : history_) {
      std::snprintf(buf, sizeof buf, "%a", o.loss);
      os << o.iteration << " " << o.sample_id << " " << buf << "\n";
    }
    return os.str();
  }

  static LossStats deserialize(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    std::uint64_t window = 0;
    if (!(is >> tag >> window) || tag != "window" || window == 0) throw FormatError("loss stats: bad header");
    LossStats s(window);
    std::uint64_t it = 0;
    std::string id, hex;
    while (is >> it >> id >> hex) {
      char* end = nullptr;
      const double v = std::strtod(hex.c_str(), &end);
      if (end != hex.c_str() + hex.size()) throw FormatError("loss stats: bad value '" + hex + "'");
      s.history_.push_back({it, id, v});
    }
    if (!is.eof()) throw FormatError("loss stats: trailing garbage");
    return s;
  }

  bool operator==(const LossStats& o) const { return window_ == o.window_ && history_ == o.history_; }

 private:
  std::uint64_t window_;
  std::deque<LossObservation> history_;
};

}  // namespace simpleir
