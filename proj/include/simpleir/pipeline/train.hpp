#pragma once

// Stage runner and the full sequential curriculum with review.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simpleir/curriculum/plan.hpp"
#include "simpleir/data/kvtext.hpp"
#include "simpleir/pipeline/evaluate.hpp"
#include "simpleir/pipeline/optimizer.hpp"

namespace simpleir {

struct TrainConfig {
  ModelConfig model = ModelConfig::desk();
  LossConfig loss;
  AdamWConfig adam;
  HarvestConfig harvest;
  ScheduleConfig schedule;
  TileConfig tiles;
  std::uint64_t seed = 0;
  bool flips = true;  ///< random horizontal/vertical flips
};

/// Metrics on every plan dataset after one stage.
struct StageMetrics {
  std::size_t stage = 0;
  std::string trained_on;
  std::vector<std::pair<std::string, MetricReport>> reports;  ///< plan order

  const MetricReport& at(const std::string& dataset) const {
    for (const auto& [name, r] : reports)
      if (name == dataset) return r;
    throw ContractError("no metrics for dataset '" + dataset + "'");
  }
};

struct TrainState {
  ModelConfig config;
  ParameterSet params;
  OptimizerState opt;
  std::uint64_t iteration = 0;        ///< completed optimizer steps over the whole run
  std::size_t stage = 1;              ///< stage being trained (1-based)
  std::uint64_t stage_iteration = 0;  ///< completed steps inside the current stage
  Rng rng;
  LossStats loss_stats;
  std::vector<std::size_t> order;     ///< current epoch permutation of the roster
  std::size_t cursor = 0;
  std::vector<std::string> archive_digests;
  std::vector<StageMetrics> metrics;
};

inline TrainState initial_state(const ModelConfig& cfg, std::uint64_t seed) {
  TrainState st;
  st.config = cfg;
  st.params = init_params(cfg, seed);
  // Stored precision from the start, so a checkpoint at any iteration resumes exactly.
  for (NamedTensor& p : st.params)
    for (double& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  st.opt = OptimizerState::zeros_like(st.params);
  st.rng = Rng(derive_seed(seed, 0x7a11));
  return st;
}

/// Same window and flips applied to both images. Draw order: row, column, horizontal flip,
/// vertical flip (flip draws are skipped when flips are disabled).
inline SamplePair crop_and_flip(const SamplePair& pair, std::size_t size, Rng& rng, bool flips = true) {
  require_same_shape(pair.degraded, pair.reference, "crop_and_flip");
  const Shape s = pair.degraded.shape();
  if (size == 0 || size > s.h || size > s.w) {
    throw DimensionError("crop " + std::to_string(size) + " does not fit image " + std::to_string(s.h) + "x" +
                         std::to_string(s.w));
  }
  const std::size_t y0 = rng.uniform_int(s.h - size + 1);
  const std::size_t x0 = rng.uniform_int(s.w - size + 1);
  const bool hflip = flips && rng.coin();
  const bool vflip = flips && rng.coin();
  auto cut = [&](const Tensor& t) {
    Tensor out({s.n, s.c, size, size});
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x) {
            const std::size_t sy = y0 + (vflip ? size - 1 - y : y);
            const std::size_t sx = x0 + (hflip ? size - 1 - x : x);
            out.at(n, c, y, x) = t.at(n, c, sy, sx);
          }
    return out;
  };
  return {cut(pair.degraded), cut(pair.reference)};
}

/// One forward/backward/AdamW step on a single pair; returns the pre-update loss.
inline double train_step(TrainState& st, const SamplePair& pair, double lr, const TrainConfig& cfg) {
  Graph graph;
  const NetworkVars nv = bind_parameters(graph, st.params, st.config);
  const Var restored = simpleir_forward(graph.constant(pair.degraded), nv, st.config).restored;
  const Var loss = restoration_loss(restored, graph.constant(pair.reference), cfg.loss);
  const GradientMap grads = graph.backward(loss);
  std::vector<Tensor> g;
  g.reserve(nv.leaves.size());
  for (const Var& leaf : nv.leaves) g.push_back(grads.contains(leaf) ? grads.at(leaf) : Tensor(leaf.shape()));
  adamw_step(st.params, st.opt, g, lr, cfg.adam);
  return loss.value().item();
}

/// Lazily loaded, cached training pairs.
class SampleSource {
 public:
  explicit SampleSource(const Manifest& m) : manifest_(m) {}

  const SamplePair& get(const std::string& dataset, const std::string& id) {
    const auto key = std::make_pair(dataset, id);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, load_pair(manifest_, manifest_.find(dataset).sample(id))).first;
    return it->second;
  }

  const Manifest& manifest() const { return manifest_; }

 private:
  const Manifest& manifest_;
  std::map<std::pair<std::string, std::string>, SamplePair> cache_;
};

struct StepRecord {
  std::uint64_t iteration = 0;
  std::size_t stage = 0;
  std::string dataset;
  std::string sample_id;
  bool reviewed = false;
  double loss = 0.0;
};

/// Machine-parsable log line: iteration, stage, sample (dataset/id), loss.
inline std::string format_step(const StepRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.loss);
  return "iter=" + std::to_string(r.iteration) + " stage=" + std::to_string(r.stage) + " sample=" + r.dataset + "/" +
         r.sample_id + " loss=" + buf;
}

struct StageCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::uint64_t checkpoint_every = 0;  ///< global iterations between checkpoints; 0 disables
  /// Persists a mid-stage checkpoint and returns its location, or an empty string if it skipped.
  std::function<std::string(const TrainState&)> on_checkpoint;
  std::string last_checkpoint = "none";
};

inline std::uint64_t effective_loss_window(const StageSpec& spec, const std::vector<RosterEntry>& roster) {
  const auto own = static_cast<std::uint64_t>(
      std::count_if(roster.begin(), roster.end(), [](const RosterEntry& e) { return !e.reviewed; }));
  return std::max(spec.loss_window, own);
}

/// Runs the remaining iterations of `spec` from `st.stage_iteration` and returns the stage's
/// harvested archive. Loss observations of the stage's own samples are kept after
/// `harvest_start`; the archive is taken when the stage completes.
inline ChallengeArchive run_stage(TrainState& st, const StageSpec& spec, const std::vector<RosterEntry>& roster,
                                  SampleSource& source, const EntropyStats* entropy, const TrainConfig& cfg,
                                  StageCallbacks& cb) {
  if (roster.empty()) throw ContractError("run_stage: empty roster for stage " + std::to_string(spec.index));
  if (spec.harvest_start > spec.iterations) throw ConfigError("run_stage: harvest start beyond stage end");
  if (spec.rule == HarvestRule::entropy && entropy == nullptr) {
    throw ContractError("run_stage: entropy harvesting needs entropy statistics");
  }
  if (st.stage_iteration == 0) {
    st.loss_stats = LossStats(effective_loss_window(spec, roster));
    st.order.clear();
    st.cursor = 0;
  }
  try {
    while (st.stage_iteration < spec.iterations) {
      if (st.cursor >= st.order.size()) {
        st.order.resize(roster.size());
        std::iota(st.order.begin(), st.order.end(), std::size_t{0});
        st.rng.shuffle(st.order.begin(), st.order.end());
        st.cursor = 0;
      }
      if (st.order.size() != roster.size()) throw ContractError("run_stage: resumed roster size changed");
      const RosterEntry& entry = roster[st.order[st.cursor++]];
      const SamplePair batch = crop_and_flip(source.get(entry.dataset, entry.id), spec.crop_size, st.rng, cfg.flips);
      const double loss = train_step(st, batch, spec.lr, cfg);
      ++st.iteration;
      ++st.stage_iteration;
      if (spec.rule == HarvestRule::loss && !entry.reviewed && st.stage_iteration > spec.harvest_start) {
        st.loss_stats.record(st.iteration, entry.id, loss);
      }
      if (cb.on_step) cb.on_step({st.iteration, spec.index, entry.dataset, entry.id, entry.reviewed, loss});
      if (cb.checkpoint_every > 0 && cb.on_checkpoint && st.iteration % cb.checkpoint_every == 0) {
        if (std::string where = cb.on_checkpoint(st); !where.empty()) cb.last_checkpoint = std::move(where);
      }
    }
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(st.iteration + 1) +
                       " (last good checkpoint: " + cb.last_checkpoint + ")");
  }
  switch (spec.rule) {
    case HarvestRule::loss:
      if (st.loss_stats.empty()) return ChallengeArchive{spec.index, spec.dataset, {}};
      return harvest_by_loss(st.loss_stats, spec.kappa, spec.index, spec.dataset);
    case HarvestRule::entropy:
      return harvest_by_entropy(*entropy, spec.top_fraction, spec.index, spec.dataset);
    case HarvestRule::none:
      break;
  }
  return ChallengeArchive{spec.index, spec.dataset, {}};
}

/// Metrics on the test split of every dataset in `datasets`.
inline StageMetrics evaluate_stage(const TrainState& st, const Manifest& m, const std::vector<std::string>& datasets,
                                   std::size_t stage, const std::string& trained_on, const TrainConfig& cfg) {
  StageMetrics row{stage, trained_on, {}};
  for (const std::string& d : datasets)
    row.reports.emplace_back(d, evaluate(st.params, st.config, m, d, "test", cfg.loss, cfg.tiles));
  return row;
}

struct TrainHooks {
  StageCallbacks stage;
  std::function<void(const ChallengeArchive&)> on_archive;
  /// Returns the location of the checkpoint it wrote, or an empty string.
  std::function<std::string(const TrainState&, const StageMetrics&)> on_stage_end;
};

struct TrainResult {
  TrainState state;
  std::vector<ChallengeArchive> archives;  ///< one per completed stage
};

/// Sequential training over `stages`, mixing earlier archives into later rosters and
/// evaluating every dataset after every stage. `resume` continues a saved state; its
/// completed stages must be matched by `prior_archives` (checked by digest).
inline TrainResult train_review_learning(const TrainConfig& cfg, const Manifest& manifest,
                                         const std::vector<StageSpec>& stages, TrainHooks hooks = {},
                                         std::optional<TrainState> resume = std::nullopt,
                                         std::vector<ChallengeArchive> prior_archives = {}) {
  if (stages.empty()) throw ConfigError("train: empty stage list");
  std::vector<std::string> datasets;
  for (const StageSpec& s : stages) datasets.push_back(s.dataset);
  for (const std::string& d : datasets) manifest.find(d);

  TrainResult result{resume ? std::move(*resume) : initial_state(cfg.model, cfg.seed), {}};
  TrainState& st = result.state;
  if (!(st.config == cfg.model)) throw ContractError("train: checkpoint model config differs from requested config");
  const std::size_t done = st.stage - 1;
  if (done > stages.size()) throw ContractError("train: checkpoint is past the final stage");
  if (prior_archives.size() < done || st.archive_digests.size() != done) {
    throw DataError("train: resume needs the archives of " + std::to_string(done) + " completed stages");
  }
  for (std::size_t i = 0; i < done; ++i) {
    if (archive_digest(prior_archives[i]) != st.archive_digests[i]) {
      throw DataError("train: archive of stage " + std::to_string(i + 1) + " does not match the checkpoint digest");
    }
    result.archives.push_back(prior_archives[i]);
  }

  const SampleIndex index = sample_index(manifest);
  SampleSource source(manifest);
  for (std::size_t i = done; i < stages.size(); ++i) {
    const StageSpec& spec = stages[i];
    const DatasetEntry& entry = manifest.find(spec.dataset);
    std::vector<std::string> ids;
    for (const SampleRecord& r : entry.train) ids.push_back(r.id);
    if (ids.empty()) throw DataError("train: dataset '" + spec.dataset + "' has no training samples");
    const std::vector<ChallengeArchive> review = spec.review ? result.archives : std::vector<ChallengeArchive>{};
    const auto roster = review_mix(spec.dataset, ids, review, spec.index, spec.decay, cfg.seed, index);
    const EntropyStats entropy = compute_entropy_stats(manifest, entry);

    ChallengeArchive archive = run_stage(st, spec, roster, source, &entropy, cfg, hooks.stage);
    st.archive_digests.push_back(archive_digest(archive));
    result.archives.push_back(archive);
    if (hooks.on_archive) hooks.on_archive(archive);

    const StageMetrics row = evaluate_stage(st, manifest, datasets, spec.index, spec.dataset, cfg);
    st.metrics.push_back(row);
    st.stage = spec.index + 1;
    st.stage_iteration = 0;
    st.order.clear();
    st.cursor = 0;
    st.loss_stats = LossStats();
    if (hooks.on_stage_end) {
      const std::string where = hooks.on_stage_end(st, row);
      if (!where.empty()) hooks.stage.last_checkpoint = where;
    }
  }
  return result;
}

/// Metric rows as "metrics.*" keys of a key-value document.
inline void put_metrics(KvText& kv, const std::vector<StageMetrics>& rows) {
  kv.set("metrics.rows", rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const StageMetrics& row = rows[i];
    const std::string p = "metrics." + std::to_string(i) + ".";
    kv.set(p + "stage", row.stage);
    kv.set(p + "trained_on", row.trained_on);
    kv.set(p + "datasets", row.reports.size());
    for (std::size_t j = 0; j < row.reports.size(); ++j) {
      const std::string q = p + std::to_string(j) + ".";
      const auto& [name, r] = row.reports[j];
      kv.set(q + "name", name);
      kv.set(q + "psnr", r.psnr);
      kv.set(q + "ssim", r.ssim);
      kv.set(q + "loss", r.loss);
      kv.set(q + "samples", r.sample_count);
    }
  }
}

inline std::vector<StageMetrics> get_metrics(const KvText& kv) {
  std::vector<StageMetrics> rows;
  const std::uint64_t n = kv.get_uint("metrics.rows");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string p = "metrics." + std::to_string(i) + ".";
    StageMetrics row{kv.get_uint(p + "stage"), kv.get(p + "trained_on"), {}};
    const std::uint64_t m = kv.get_uint(p + "datasets");
    for (std::uint64_t j = 0; j < m; ++j) {
      const std::string q = p + std::to_string(j) + ".";
      row.reports.emplace_back(kv.get(q + "name"),
                               MetricReport{kv.get_double(q + "psnr"), kv.get_double(q + "ssim"),
                                            kv.get_double(q + "loss"), kv.get_uint(q + "samples")});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Stage x dataset table of PSNR / SSIM.
inline std::string format_metric_grid(const std::vector<StageMetrics>& rows) {
  if (rows.empty()) return "";
  std::string out = "stage\ttrained_on";
  for (const auto& [name, r] : rows.front().reports) out += "\t" + name + ".psnr\t" + name + ".ssim";
  out += "\tmean.psnr\tmean.ssim\n";
  for (const StageMetrics& row : rows) {
    out += std::to_string(row.stage) + "\t" + row.trained_on;
    double p = 0.0, s = 0.0;
    for (const auto& [name, r] : row.reports) {
      out += "\t" + format_number(r.psnr, 4) + "\t" + format_number(r.ssim, 4);
      p += r.psnr;
      s += r.ssim;
    }
    const double n = static_cast<double>(row.reports.size());
    out += "\t" + format_number(p / n, 4) + "\t" + format_number(s / n, 4) + "\n";
  }
  return out;
}

}  // namespace simpleir
