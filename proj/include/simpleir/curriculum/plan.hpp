#pragma once

// Dataset ranking by mean entropy difference and the stage schedule derived from it.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "simpleir/curriculum/archive.hpp"
#include "simpleir/curriculum/stats.hpp"
#include "simpleir/data/kvtext.hpp"
#include "simpleir/data/manifest.hpp"

namespace simpleir {

struct DatasetDescriptor {
  std::string name;
  std::string task;
  std::vector<std::string> sample_ids;  ///< training split, manifest order
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::optional<EntropyStats> stats;
};

/// Uses precomputed entropy differences when every training record has one; otherwise
/// recomputes them from the image files.
inline EntropyStats compute_entropy_stats(const Manifest& m, const DatasetEntry& d) {
  std::vector<std::string> ids;
  std::vector<double> values;
  for (const SampleRecord& r : d.train) {
    ids.push_back(r.id);
    values.push_back(r.entropy_difference ? *r.entropy_difference
                                          : entropy_difference(load_image(m.resolve(r.reference)),
                                                               load_image(m.resolve(r.degraded))));
  }
  return make_entropy_stats(std::move(ids), std::move(values));
}

inline DatasetDescriptor describe(const Manifest& m, const DatasetEntry& d, bool with_stats = true) {
  DatasetDescriptor out{d.name, d.task, {}, d.train.size(), d.test.size(), std::nullopt};
  for (const SampleRecord& r : d.train) out.sample_ids.push_back(r.id);
  if (with_stats) out.stats = compute_entropy_stats(m, d);
  return out;
}

inline std::vector<DatasetDescriptor> describe_all(const Manifest& m) {
  std::vector<DatasetDescriptor> out;
  for (const DatasetEntry& d : m.datasets) out.push_back(describe(m, d));
  return out;
}

inline SampleIndex sample_index(const Manifest& m) {
  SampleIndex idx;
  for (const DatasetEntry& d : m.datasets)
    for (const SampleRecord& r : d.train) idx[d.name].insert(r.id);
  return idx;
}

struct HarvestConfig {
  double kappa = 1.0;
  double top_fraction = 0.2;
  double decay = 0.5;
  double stage1_fraction_target = 0.1;  ///< informational; the loss rule does not enforce it

  void validate() const {
    if (!std::isfinite(kappa)) throw ConfigError("kappa must be finite");
    if (!(top_fraction >= 0.0 && top_fraction <= 1.0)) throw ConfigError("top_fraction must lie in [0, 1]");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  }
};

struct CurriculumPlan {
  std::vector<std::string> order;           ///< easiest first
  std::vector<double> mean_differences;     ///< aligned with order
  double decay = 0.5;

  /// Fraction of an archive replayed `elapsed` stages after it was harvested.
  double quota_factor(std::size_t elapsed) const { return std::pow(decay, double(elapsed)); }
  bool operator==(const CurriculumPlan&) const = default;
};

/// Ascending mean entropy difference; equal means fall back to name order.
inline CurriculumPlan rank_datasets(const std::vector<DatasetDescriptor>& descriptors, double decay = 0.5) {
  if (descriptors.empty()) throw ConfigError("rank_datasets: no datasets");
  std::vector<std::pair<double, std::string>> keyed;
  for (const DatasetDescriptor& d : descriptors) {
    if (!d.stats) throw ContractError("rank_datasets: dataset '" + d.name + "' has no entropy statistics");
    keyed.emplace_back(d.stats->mean, d.name);
  }
  std::sort(keyed.begin(), keyed.end());
  CurriculumPlan plan;
  plan.decay = decay;
  for (const auto& [mean, name] : keyed) {
    if (!plan.order.empty() && plan.order.back() == name) {
      throw ContractError("rank_datasets: duplicate dataset '" + name + "'");
    }
    plan.order.push_back(name);
    plan.mean_differences.push_back(mean);
  }
  return plan;
}

/// A seeded permutation of the plan that differs from the ranked order whenever more than
/// one dataset is present.
inline CurriculumPlan shuffled_plan(const CurriculumPlan& plan, std::uint64_t seed) {
  const std::size_t n = plan.order.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  if (n > 1) {
    Rng rng(derive_seed(seed, 0x0d3e7));
    bool identity = true;
    for (int attempt = 0; attempt < 64 && identity; ++attempt) {
      rng.shuffle(perm.begin(), perm.end());
      identity = std::is_sorted(perm.begin(), perm.end());
    }
    if (identity) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
  }
  CurriculumPlan out;
  out.decay = plan.decay;
  for (std::size_t i : perm) {
    out.order.push_back(plan.order[i]);
    out.mean_differences.push_back(plan.mean_differences[i]);
  }
  return out;
}

/// Iteration budgets and learning rates before scaling.
struct ScheduleConfig {
  double scale = 1.0;
  std::uint64_t first_iterations = 200000;
  std::uint64_t later_iterations = 10000;
  std::uint64_t harvest_start = 100000;  ///< stage 1 only
  std::uint64_t loss_window = 1000;
  double first_lr = 2e-4;
  double later_lr = 1e-4;
  std::size_t crop_size = 512;

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be a positive number");
    if (crop_size == 0) throw ConfigError("crop size must be positive");
    if (!(first_lr > 0.0) || !(later_lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
};

inline std::uint64_t scaled(std::uint64_t count, double scale) {
  return static_cast<std::uint64_t>(std::llround(double(count) * scale));
}

struct StageSpec {
  std::size_t index = 1;  ///< 1-based
  std::string dataset;
  std::uint64_t iterations = 0;
  double lr = 0.0;
  std::size_t crop_size = 0;
  HarvestRule rule = HarvestRule::none;
  std::uint64_t harvest_start = 0;
  std::uint64_t loss_window = 1;
  double kappa = 1.0;
  double top_fraction = 0.2;
  double decay = 0.5;
  bool review = false;  ///< mix earlier archives into the roster

  bool operator==(const StageSpec&) const = default;
};

/// Stage 1 trains with loss harvesting from the scaled harvest start; later stages train
/// with entropy harvesting and review of earlier archives. A zero top_fraction turns review
/// off entirely (the no-review baseline).
inline std::vector<StageSpec> plan_stages(const CurriculumPlan& plan, const HarvestConfig& harvest,
                                          const ScheduleConfig& schedule) {
  if (plan.order.empty()) throw ConfigError("plan_stages: empty plan");
  harvest.validate();
  schedule.validate();
  std::vector<StageSpec> stages;
  for (std::size_t i = 0; i < plan.order.size(); ++i) {
    StageSpec s;
    s.index = i + 1;
    s.dataset = plan.order[i];
    s.crop_size = schedule.crop_size;
    s.kappa = harvest.kappa;
    s.top_fraction = harvest.top_fraction;
    s.decay = harvest.decay;
    s.loss_window = std::max<std::uint64_t>(1, scaled(schedule.loss_window, schedule.scale));
    if (i == 0) {
      s.iterations = scaled(schedule.first_iterations, schedule.scale);
      s.lr = schedule.first_lr;
      s.rule = HarvestRule::loss;
      s.harvest_start = std::min(s.iterations, scaled(schedule.harvest_start, schedule.scale));
    } else {
      s.iterations = scaled(schedule.later_iterations, schedule.scale);
      s.lr = schedule.later_lr;
      s.rule = harvest.top_fraction > 0.0 ? HarvestRule::entropy : HarvestRule::none;
      s.harvest_start = 0;
      s.review = harvest.top_fraction > 0.0;
    }
    stages.push_back(s);
  }
  return stages;
}

inline constexpr int kPlanVersion = 1;

inline std::string plan_to_text(const CurriculumPlan& plan, const HarvestConfig& harvest,
                                const std::vector<StageSpec>& stages) {
  KvText kv;
  kv.set("format", "simpleir-plan");
  kv.set("version", kPlanVersion);
  kv.set("stages", plan.order.size());
  kv.set("decay", plan.decay);
  kv.set("kappa", harvest.kappa);
  kv.set("top_fraction", harvest.top_fraction);
  for (std::size_t i = 0; i < plan.order.size(); ++i) {
    const std::string p = "stage." + std::to_string(i + 1) + ".";
    kv.set(p + "dataset", plan.order[i]);
    kv.set(p + "mean_entropy_difference", plan.mean_differences[i]);
    if (i < stages.size()) {
      kv.set(p + "iterations", stages[i].iterations);
      kv.set(p + "lr", stages[i].lr);
      kv.set(p + "crop", stages[i].crop_size);
      kv.set(p + "harvest", to_string(stages[i].rule));
      kv.set(p + "harvest_start", stages[i].harvest_start);
      kv.set(p + "loss_window", stages[i].loss_window);
      kv.set(p + "review", stages[i].review ? 1 : 0);
    }
  }
  for (std::size_t k = 1; k < plan.order.size(); ++k) kv.set("quota_factor." + std::to_string(k), plan.quota_factor(k));
  return kv.str();
}

struct PlanDocument {
  CurriculumPlan plan;
  HarvestConfig harvest;
  std::vector<StageSpec> stages;  ///< empty when the file lists no schedule
};

inline PlanDocument plan_from_text(const std::string& text) {
  const KvText kv = KvText::parse(text);
  if (kv.get("format") != "simpleir-plan") throw FormatError("plan: not a simpleir plan");
  if (kv.get_uint("version") != kPlanVersion) {
    throw VersionError("plan: version " + kv.get("version") + " unsupported (expected " +
                       std::to_string(kPlanVersion) + ")");
  }
  PlanDocument doc;
  doc.plan.decay = kv.get_double("decay");
  doc.harvest.decay = doc.plan.decay;
  doc.harvest.kappa = kv.get_double("kappa");
  doc.harvest.top_fraction = kv.get_double("top_fraction");
  const std::uint64_t n = kv.get_uint("stages");
  for (std::uint64_t i = 1; i <= n; ++i) {
    const std::string p = "stage." + std::to_string(i) + ".";
    doc.plan.order.push_back(kv.get(p + "dataset"));
    doc.plan.mean_differences.push_back(kv.get_double(p + "mean_entropy_difference"));
    if (kv.contains(p + "iterations")) {
      StageSpec s;
      s.index = i;
      s.dataset = doc.plan.order.back();
      s.iterations = kv.get_uint(p + "iterations");
      s.lr = kv.get_double(p + "lr");
      s.crop_size = kv.get_uint(p + "crop");
      s.rule = parse_harvest_rule(kv.get(p + "harvest"));
      s.harvest_start = kv.get_uint(p + "harvest_start");
      s.loss_window = kv.get_uint(p + "loss_window");
      s.review = kv.get_uint(p + "review") != 0;
      s.kappa = doc.harvest.kappa;
      s.top_fraction = doc.harvest.top_fraction;
      s.decay = doc.harvest.decay;
      doc.stages.push_back(s);
    }
  }
  doc.harvest.validate();
  return doc;
}

}  // namespace simpleir
