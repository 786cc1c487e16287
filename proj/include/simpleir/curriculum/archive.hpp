#pragma once

// Challenging-sample archives: harvesting by loss (mu + kappa * sigma) or by entropy
// difference, and decayed replay of earlier archives into later rosters.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simpleir/curriculum/stats.hpp"
#include "simpleir/data/files.hpp"
#include "simpleir/numerics/random.hpp"

namespace simpleir {

enum class HarvestRule { none, loss, entropy };

inline std::string to_string(HarvestRule r) {
  switch (r) {
    case HarvestRule::none: return "none";
    case HarvestRule::loss: return "loss";
    case HarvestRule::entropy: return "entropy";
  }
  return "?";
}

inline HarvestRule parse_harvest_rule(const std::string& s) {
  if (s == "none") return HarvestRule::none;
  if (s == "loss") return HarvestRule::loss;
  if (s == "entropy") return HarvestRule::entropy;
  throw FormatError("unknown harvest rule '" + s + "'");
}

struct ArchiveEntry {
  std::string id;
  double score = 0.0;
  HarvestRule rule = HarvestRule::loss;

  bool operator==(const ArchiveEntry&) const = default;
};

/// Samples harvested from one dataset at one stage, sorted by score descending, then id.
struct ChallengeArchive {
  std::size_t stage = 1;
  std::string dataset;
  std::vector<ArchiveEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const ChallengeArchive&) const = default;
};

inline void sort_entries(std::vector<ArchiveEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ArchiveEntry& a, const ArchiveEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

struct LossSummary {
  double mu = 0.0;
  double sigma = 0.0;  ///< population standard deviation
};

inline LossSummary summarize(const std::map<std::string, double>& losses) {
  LossSummary s;
  if (losses.empty()) return s;
  for (const auto& [id, v] : losses) s.mu += v;
  s.mu /= double(losses.size());
  double var = 0.0;
  for (const auto& [id, v] : losses) var += (v - s.mu) * (v - s.mu);
  s.sigma = std::sqrt(var / double(losses.size()));
  return s;
}

/// Selects samples whose loss is strictly greater than mu + kappa * sigma.
inline ChallengeArchive harvest_by_loss(const std::map<std::string, double>& losses, double kappa,
                                        std::size_t stage, const std::string& dataset) {
  if (losses.empty()) throw ContractError("harvest_by_loss: empty loss history");
  if (!std::isfinite(kappa)) throw ConfigError("harvest_by_loss: kappa must be finite");
  const LossSummary s = summarize(losses);
  const double threshold = s.mu + kappa * s.sigma;
  ChallengeArchive a{stage, dataset, {}};
  for (const auto& [id, v] : losses)
    if (v > threshold) a.entries.push_back({id, v, HarvestRule::loss});
  sort_entries(a.entries);
  return a;
}

inline ChallengeArchive harvest_by_loss(const LossStats& stats, double kappa, std::size_t stage,
                                        const std::string& dataset) {
  return harvest_by_loss(stats.per_sample(), kappa, stage, dataset);
}

/// The ceil(fraction * N) samples with the highest entropy difference.
inline ChallengeArchive harvest_by_entropy(const EntropyStats& stats, double fraction, std::size_t stage,
                                           const std::string& dataset) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("harvest_by_entropy: fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
  std::vector<ArchiveEntry> all;
  for (std::size_t i = 0; i < stats.size(); ++i) all.push_back({stats.ids[i], stats.values[i], HarvestRule::entropy});
  sort_entries(all);
  const auto take = static_cast<std::size_t>(std::ceil(fraction * double(all.size()) - 1e-9));
  all.resize(std::min(take, all.size()));
  return ChallengeArchive{stage, dataset, std::move(all)};
}

/// floor(size * decay^(stage - source_stage)), never negative.
inline std::size_t review_quota(std::size_t archive_size, std::size_t source_stage, std::size_t stage, double decay) {
  if (stage <= source_stage) {
    throw ContractError("review quota: archive from stage " + std::to_string(source_stage) +
                        " cannot be reviewed at stage " + std::to_string(stage));
  }
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("review decay must lie in (0, 1]");
  const double q = double(archive_size) * std::pow(decay, double(stage - source_stage));
  return static_cast<std::size_t>(std::max(0.0, std::floor(q + 1e-9)));
}

struct RosterEntry {
  std::string dataset;
  std::string id;
  bool reviewed = false;  ///< drawn from an earlier archive

  bool operator==(const RosterEntry&) const = default;
};

/// Known sample ids per dataset, used to validate archives.
using SampleIndex = std::map<std::string, std::set<std::string>>;

/// Current dataset plus the top quota entries of every earlier archive, shuffled by
/// (seed, stage). Without reviewed entries the dataset order is returned unchanged.
inline std::vector<RosterEntry> review_mix(const std::string& dataset, const std::vector<std::string>& ids,
                                           const std::vector<ChallengeArchive>& archives, std::size_t stage,
                                           double decay, std::uint64_t seed, const SampleIndex& known) {
  if (stage < 1) throw ContractError("review_mix: stage index starts at 1");
  std::vector<RosterEntry> roster;
  for (const std::string& id : ids) roster.push_back({dataset, id, false});
  bool reviewed = false;
  for (const ChallengeArchive& a : archives) {
    const auto ds = known.find(a.dataset);
    if (ds == known.end()) throw DataError("archive references unknown dataset '" + a.dataset + "'");
    const std::size_t quota = std::min(review_quota(a.size(), a.stage, stage, decay), a.size());
    for (std::size_t i = 0; i < quota; ++i) {
      if (!ds->second.count(a.entries[i].id)) {
        throw DataError("archive references unknown sample '" + a.entries[i].id + "' in '" + a.dataset + "'");
      }
      roster.push_back({a.dataset, a.entries[i].id, true});
      reviewed = true;
    }
  }
  if (reviewed) {
    Rng rng(derive_seed(seed, 0x5fa9e000 + stage));
    rng.shuffle(roster.begin(), roster.end());
  }
  return roster;
}

// Archive file: a header line, then one tab-separated record per line:
//   id  score  rule  source_stage

inline std::string archive_to_text(const ChallengeArchive& a) {
  std::ostringstream os;
  os << "# simpleir-archive v1 dataset=" << a.dataset << " stage=" << a.stage << " entries=" << a.size() << "\n";
  char buf[40];
  for (const ArchiveEntry& e : a.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.score);
    os << e.id << "\t" << buf << "\t" << to_string(e.rule) << "\t" << a.stage << "\n";
  }
  return os.str();
}

inline ChallengeArchive archive_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  std::getline(is, header);
  ChallengeArchive a;
  char dataset[256] = {};
  std::size_t stage = 0, count = 0;
  if (std::sscanf(header.c_str(), "# simpleir-archive v1 dataset=%255s stage=%zu entries=%zu", dataset, &stage,
                  &count) != 3) {
    throw FormatError("archive: bad header '" + header + "'");
  }
  a.dataset = dataset;
  a.stage = stage;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, score, rule;
    std::size_t src = 0;
    if (!std::getline(ls, id, '\t') || !std::getline(ls, score, '\t') || !std::getline(ls, rule, '\t') ||
        !(ls >> src)) {
      throw FormatError("archive: malformed record '" + line + "'");
    }
    if (src != stage) throw FormatError("archive: record stage " + std::to_string(src) + " != header stage");
    char* end = nullptr;
    const double v = std::strtod(score.c_str(), &end);
    if (end != score.c_str() + score.size()) throw FormatError("archive: bad score '" + score + "'");
    a.entries.push_back({id, v, parse_harvest_rule(rule)});
  }
  if (a.entries.size() != count) throw FormatError("archive: header promises " + std::to_string(count) + " entries");
  return a;
}

inline void save_archive(const ChallengeArchive& a, const fs::path& path) { write_file_atomic(path, archive_to_text(a)); }
inline ChallengeArchive load_archive(const fs::path& path) { return archive_from_text(read_file(path)); }

/// Short content digest (FNV-1a 64) used to tie checkpoints to archive contents.
inline std::string archive_digest(const ChallengeArchive& a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : archive_to_text(a)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace simpleir
