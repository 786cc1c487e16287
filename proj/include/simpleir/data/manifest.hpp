#pragma once

// Dataset manifests: a versioned JSON document listing datasets, their task tags and
// train/test splits of (degraded, reference) image pairs.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "simpleir/curriculum/entropy.hpp"
#include "simpleir/data/image.hpp"
#include "simpleir/data/synth.hpp"

namespace simpleir {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFormat = "simpleir-manifest";

struct SampleRecord {
  std::string id;
  std::string degraded;   ///< relative to the manifest directory
  std::string reference;  ///< relative to the manifest directory
  std::optional<double> entropy_difference;
};

struct DatasetEntry {
  std::string name;
  std::string task;  ///< desnow | deblur | derain | llie | custom
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;

  const std::vector<SampleRecord>& split(const std::string& which) const {
    if (which == "train") return train;
    if (which == "test") return test;
    throw ConfigError("unknown split '" + which + "' (train, test)");
  }

  const SampleRecord& sample(const std::string& id) const {
    for (const auto* s : {&train, &test})
      for (const SampleRecord& r : *s)
        if (r.id == id) return r;
    throw DataError("dataset '" + name + "' has no sample '" + id + "'");
  }
};

struct Manifest {
  fs::path root;  ///< directory that relative sample paths resolve against
  std::vector<DatasetEntry> datasets;

  const DatasetEntry& find(const std::string& name) const {
    for (const DatasetEntry& d : datasets)
      if (d.name == name) return d;
    throw DataError("manifest has no dataset '" + name + "'");
  }

  fs::path resolve(const std::string& relative) const { return root / relative; }
};

inline const std::set<std::string>& known_task_tags() {
  static const std::set<std::string> tags{"desnow", "deblur", "derain", "llie", "custom"};
  return tags;
}

inline std::string manifest_to_json(const Manifest& m) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["format"] = kManifestFormat;
  doc["version"] = kManifestVersion;
  doc["datasets"] = ordered_json::array();
  for (const DatasetEntry& d : m.datasets) {
    ordered_json jd;
    jd["name"] = d.name;
    jd["task"] = d.task;
    for (const char* split : {"train", "test"}) {
      ordered_json arr = ordered_json::array();
      for (const SampleRecord& r : d.split(split)) {
        ordered_json js;
        js["id"] = r.id;
        js["degraded"] = r.degraded;
        js["reference"] = r.reference;
        if (r.entropy_difference) js["entropy_difference"] = *r.entropy_difference;
        arr.push_back(js);
      }
      jd["splits"][split] = arr;
    }
    doc["datasets"].push_back(jd);
  }
  return doc.dump(2) + "\n";
}

/// Parses and validates structure (version, unique ids, known task tags); file existence is
/// checked by `verify_manifest_files`.
inline Manifest manifest_from_json(const std::string& text, const fs::path& root) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  try {
    if (doc.value("format", "") != kManifestFormat) throw FormatError("manifest: not a simpleir manifest");
    const int version = doc.at("version").get<int>();
    if (version != kManifestVersion) {
      throw VersionError("manifest: version " + std::to_string(version) + " unsupported (expected " +
                         std::to_string(kManifestVersion) + ")");
    }
    Manifest m;
    m.root = root;
    std::set<std::string> names;
    for (const auto& jd : doc.at("datasets")) {
      DatasetEntry d;
      d.name = jd.at("name").get<std::string>();
      d.task = jd.at("task").get<std::string>();
      if (!names.insert(d.name).second) throw DataError("manifest: duplicate dataset '" + d.name + "'");
      if (!known_task_tags().count(d.task)) throw DataError("manifest: unknown task tag '" + d.task + "'");
      std::set<std::string> ids;
      for (const char* split : {"train", "test"}) {
        auto& target = std::string(split) == "train" ? d.train : d.test;
        for (const auto& js : jd.at("splits").at(split)) {
          SampleRecord r{js.at("id").get<std::string>(), js.at("degraded").get<std::string>(),
                         js.at("reference").get<std::string>(), std::nullopt};
          if (js.contains("entropy_difference")) r.entropy_difference = js["entropy_difference"].get<double>();
          if (!ids.insert(r.id).second) {
            throw DataError("manifest: duplicate sample id '" + r.id + "' in '" + d.name + "'");
          }
          target.push_back(std::move(r));
        }
      }
      m.datasets.push_back(std::move(d));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

/// Every referenced file exists (pair dimensions are checked by `load_pair`).
inline void verify_manifest_files(const Manifest& m) {
  for (const DatasetEntry& d : m.datasets)
    for (const auto* split : {&d.train, &d.test})
      for (const SampleRecord& r : *split) {
        for (const std::string& rel : {r.degraded, r.reference}) {
          if (!fs::exists(m.resolve(rel))) {
            throw DataError("manifest: '" + d.name + "/" + r.id + "' references missing file '" + rel + "'");
          }
        }
      }
}

inline Manifest load_manifest(const fs::path& path) {
  Manifest m = manifest_from_json(read_file(path), path.parent_path());
  verify_manifest_files(m);
  return m;
}

inline void save_manifest(const Manifest& m, const fs::path& path) { write_file_atomic(path, manifest_to_json(m)); }

/// Loaded (degraded, reference) pair as (1, 3, h, w) tensors.
struct SamplePair {
  Tensor degraded;
  Tensor reference;
};

inline SamplePair load_pair(const Manifest& m, const SampleRecord& r) {
  const ImageBuffer lq = load_image(m.resolve(r.degraded));
  const ImageBuffer gt = load_image(m.resolve(r.reference));
  if (lq.h != gt.h || lq.w != gt.w) {
    throw DataError("sample '" + r.id + "': degraded " + std::to_string(lq.h) + "x" + std::to_string(lq.w) +
                    " vs reference " + std::to_string(gt.h) + "x" + std::to_string(gt.w));
  }
  return {to_tensor(lq), to_tensor(gt)};
}

struct ManifestBuildConfig {
  std::vector<DegradationKind> kinds = all_degradations();
  std::size_t train_count = 30;
  std::size_t test_count = 3;
  std::size_t image_size = 64;
  std::uint64_t seed = 0;
  std::map<DegradationKind, double> strengths;  ///< overrides of default_strength
  /// Reject corpora whose per-kind mean entropy differences are not pairwise distinct.
  bool require_distinct_means = true;
};

inline double mean_entropy_difference(const DatasetEntry& d) {
  if (d.train.empty()) return 0.0;
  double total = 0.0;
  for (const SampleRecord& r : d.train) {
    if (!r.entropy_difference) throw ContractError("dataset '" + d.name + "' lacks entropy statistics");
    total += *r.entropy_difference;
  }
  return total / static_cast<double>(d.train.size());
}

/// Generates textures, degrades them, writes PNG pairs under `out_dir` and returns the
/// manifest (also written to `out_dir/manifest.json`). Every sample has its own texture, so
/// splits and datasets never share a source.
inline Manifest build_manifest(const fs::path& out_dir, const ManifestBuildConfig& cfg) {
  if (cfg.image_size < 16) throw ConfigError("build_manifest: image_size must be at least 16");
  std::set<DegradationKind> seen;
  for (DegradationKind k : cfg.kinds)
    if (!seen.insert(k).second) throw ConfigError("build_manifest: duplicate kind '" + to_string(k) + "'");

  Manifest m;
  m.root = out_dir;
  for (DegradationKind kind : cfg.kinds) {
    const double strength = cfg.strengths.count(kind) ? cfg.strengths.at(kind) : default_strength(kind);
    DatasetEntry d{to_string(kind), task_tag(kind), {}, {}};
    for (const char* split : {"train", "test"}) {
      const bool is_train = std::string(split) == "train";
      const std::size_t count = is_train ? cfg.train_count : cfg.test_count;
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t stream =
            (static_cast<std::uint64_t>(kind) << 40) | (static_cast<std::uint64_t>(is_train ? 0 : 1) << 32) | i;
        const ImageBuffer clean =
            quantized(procedural_texture(cfg.image_size, cfg.image_size, derive_seed(cfg.seed, stream)));
        const ImageBuffer degraded =
            quantized(synthesize(kind, clean, derive_seed(cfg.seed ^ 0x5eed, stream), strength));
        char idbuf[24];
        std::snprintf(idbuf, sizeof idbuf, "%04zu", i);
        const std::string id = d.name + "-" + split + "-" + idbuf;
        const std::string base = d.name + "/" + split + "/" + idbuf;
        SampleRecord r{id, base + "_lq.png", base + "_gt.png", entropy_difference(clean, degraded)};
        save_image(degraded, m.resolve(r.degraded));
        save_image(clean, m.resolve(r.reference));
        (is_train ? d.train : d.test).push_back(std::move(r));
      }
    }
    m.datasets.push_back(std::move(d));
  }

  if (cfg.require_distinct_means) {
    for (std::size_t a = 0; a < m.datasets.size(); ++a)
      for (std::size_t b = a + 1; b < m.datasets.size(); ++b) {
        if (m.datasets[a].train.empty()) continue;
        const double ma = mean_entropy_difference(m.datasets[a]);
        const double mb = mean_entropy_difference(m.datasets[b]);
        if (std::abs(ma - mb) < 1e-6) {
          throw DataError("build_manifest: datasets '" + m.datasets[a].name + "' and '" + m.datasets[b].name +
                          "' have indistinguishable mean entropy differences");
        }
      }
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace simpleir
