#pragma once

// Ordered "key = value" documents used for plans, run summaries and checkpoint state.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "simpleir/numerics/errors.hpp"

namespace simpleir {

/// Shortest "%.17g" rendering; infinities as "inf" / "-inf".
inline std::string exact_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class KvText {
 public:
  void set(const std::string& key, const std::string& value) {
    if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw ContractError("kv text: key/value '" + key + "' contains a reserved character");
    }
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value) { set(key, exact_number(value)); }
  template <std::integral T>
  void set(const std::string& key, T value) {
    set(key, std::to_string(value));
  }

  bool contains(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.first == key) return true;
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.first == key) return e.second;
    throw FormatError("missing key '" + key + "'");
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw FormatError("key '" + key + "': malformed number '" + s + "'");
  }

  std::uint64_t get_uint(const std::string& key) const {
    const std::string& s = get(key);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw FormatError("key '" + key + "': malformed integer '" + s + "'");
    }
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw FormatError("key '" + key + "': integer out of range '" + s + "'");
    }
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  /// Blank lines and lines starting with '#' are ignored.
  static KvText parse(const std::string& text) {
    KvText kv;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected 'key = value'");
      kv.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return kv;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace simpleir
