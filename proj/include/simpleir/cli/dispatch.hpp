#pragma once

// Command-line front end: make-data, init, rank, train, harvest, eval, infer, report.
// Exit codes: 0 success, 1 usage, 2 data, 3 numeric failure.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simpleir/pipeline/checkpoint.hpp"

namespace simpleir::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

inline constexpr const char* kOutEnv = "SIMPLEIR_OUT";

/// Parsed command line. Optional fields override the config file, which overrides defaults.
struct CliConfig {
  std::string command;
  fs::path manifest;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  fs::path out;
  fs::path checkpoint;
  std::optional<double> review_fraction;

  std::optional<std::string> preset;
  std::optional<std::size_t> crop;
  std::string order = "ranked";
  std::uint64_t checkpoint_every = 0;
  std::uint64_t stop_after = 0;  ///< simulated interruption: snapshot and stop at this iteration
  bool resume = false;

  // make-data
  std::vector<std::string> kinds;
  std::size_t train_count = 30;
  std::size_t test_count = 3;
  std::size_t image_size = 64;

  // init
  bool zero = false;

  // harvest / eval
  std::string dataset;
  std::string rule = "loss";
  std::size_t stage = 1;
  std::string split = "test";

  // infer
  fs::path input;
  std::optional<std::size_t> tile;
  std::optional<std::size_t> overlap;

  // report
  std::vector<fs::path> runs;
};

/// `--out` when given, else $SIMPLEIR_OUT joined with `leaf`, else ./simpleir_out/`leaf`.
inline fs::path output_dir(const CliConfig& c, const std::string& leaf) {
  if (!c.out.empty()) return c.out;
  const char* env = std::getenv(kOutEnv);
  const fs::path base = (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("simpleir_out");
  return base / leaf;
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(p)) throw DataError(what + " '" + p.string() + "' does not exist");
}

// Configuration

/// Defaults, then the key-value config file, then explicit flags.
inline TrainConfig resolve_train_config(const CliConfig& c) {
  TrainConfig tc;
  std::string preset = "desk";
  if (!c.config.empty()) {
    require_file(c.config, "config");
    const KvText kv = KvText::parse(read_file(c.config));
    for (const auto& [key, value] : kv.entries()) {
      if (key == "preset") preset = value;
      else if (key == "seed") tc.seed = kv.get_uint(key);
      else if (key == "scale") tc.schedule.scale = kv.get_double(key);
      else if (key == "crop") tc.schedule.crop_size = kv.get_uint(key);
      else if (key == "first_iterations") tc.schedule.first_iterations = kv.get_uint(key);
      else if (key == "later_iterations") tc.schedule.later_iterations = kv.get_uint(key);
      else if (key == "harvest_start") tc.schedule.harvest_start = kv.get_uint(key);
      else if (key == "loss_window") tc.schedule.loss_window = kv.get_uint(key);
      else if (key == "first_lr") tc.schedule.first_lr = kv.get_double(key);
      else if (key == "later_lr") tc.schedule.later_lr = kv.get_double(key);
      else if (key == "kappa") tc.harvest.kappa = kv.get_double(key);
      else if (key == "review_fraction") tc.harvest.top_fraction = kv.get_double(key);
      else if (key == "decay") tc.harvest.decay = kv.get_double(key);
      else if (key == "lambda") tc.loss.lambda = kv.get_double(key);
      else if (key == "weight_decay") tc.adam.weight_decay = kv.get_double(key);
      else if (key == "tile") tc.tiles.tile = kv.get_uint(key);
      else if (key == "overlap") tc.tiles.overlap = kv.get_uint(key);
      else if (key == "flips") tc.flips = kv.get_uint(key) != 0;
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (c.preset) preset = *c.preset;
  tc.model = ModelConfig::preset(preset);
  if (c.seed) tc.seed = *c.seed;
  if (c.scale) tc.schedule.scale = *c.scale;
  if (c.crop) tc.schedule.crop_size = *c.crop;
  if (c.review_fraction) tc.harvest.top_fraction = *c.review_fraction;
  if (c.tile) tc.tiles.tile = *c.tile;
  if (c.overlap) tc.tiles.overlap = *c.overlap;
  tc.model.validate();
  tc.loss.validate();
  tc.harvest.validate();
  tc.schedule.validate();
  tc.tiles.validate(tc.model.down_factor);
  return tc;
}

inline std::string preset_name(const ModelConfig& m) {
  for (const char* name : {"desk", "tiny", "paper"})
    if (ModelConfig::preset(name) == m) return name;
  return "custom";
}

// Run summary

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_summary(const fs::path& dir, const nlohmann::ordered_json& summary) {
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

inline nlohmann::ordered_json report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["psnr"] = format_number(r.psnr, 6);
  j["ssim"] = format_number(r.ssim, 6);
  j["loss"] = format_number(r.loss, 6);
  j["samples"] = r.sample_count;
  return j;
}

// Commands

inline int cmd_make_data(const CliConfig& c, std::ostream& out) {
  ManifestBuildConfig b;
  if (!c.kinds.empty()) {
    b.kinds.clear();
    for (const std::string& k : c.kinds) b.kinds.push_back(parse_degradation(k));
  }
  b.train_count = c.train_count;
  b.test_count = c.test_count;
  b.image_size = c.image_size;
  b.seed = c.seed.value_or(0);
  const fs::path dir = output_dir(c, "data");
  const Manifest m = build_manifest(dir, b);
  nlohmann::ordered_json s;
  s["command"] = "make-data";
  s["seed"] = b.seed;
  s["manifest"] = "manifest.json";
  for (const DatasetEntry& d : m.datasets) {
    s["datasets"][d.name] = {{"task", d.task},
                             {"train", d.train.size()},
                             {"test", d.test.size()},
                             {"mean_entropy_difference", mean_entropy_difference(d)}};
  }
  write_summary(dir, s);
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

inline int cmd_init(const CliConfig& c, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("init: --out <checkpoint> is required");
  const ModelConfig model = ModelConfig::preset(c.preset.value_or("desk"));
  model.validate();
  TrainState st = initial_state(model, c.seed.value_or(0));
  if (c.zero) {
    st.params = zero_params(model);
    st.opt = OptimizerState::zeros_like(st.params);
  }
  save_checkpoint(c.out, st);
  out << "wrote " << c.out.string() << " (" << param_count(model) << " parameters)\n";
  return kExitOk;
}

inline int cmd_rank(const CliConfig& c, std::ostream& out) {
  require_file(c.manifest, "manifest");
  const TrainConfig tc = resolve_train_config(c);
  const Manifest m = load_manifest(c.manifest);
  const fs::path dir = output_dir(c, "rank");
  const std::vector<DatasetDescriptor> descs = describe_all(m);
  const CurriculumPlan plan = rank_datasets(descs, tc.harvest.decay);
  const auto stages = plan_stages(plan, tc.harvest, tc.schedule);

  std::ostringstream values, hist;
  values << "dataset,id,entropy_difference\n";
  hist << "dataset,bin_lo,bin_hi,count\n";
  for (const DatasetDescriptor& d : descs) {
    const EntropyStats& s = *d.stats;
    for (std::size_t i = 0; i < s.size(); ++i) values << d.name << "," << s.ids[i] << "," << exact_number(s.values[i]) << "\n";
    for (std::size_t b = 0; b < s.counts.size(); ++b) {
      hist << d.name << "," << csv_number(s.bin_edges[b]) << "," << csv_number(s.bin_edges[b + 1]) << ","
           << s.counts[b] << "\n";
    }
  }
  write_file_atomic(dir / "plan.txt", plan_to_text(plan, tc.harvest, stages));
  write_file_atomic(dir / "entropy.csv", values.str());
  write_file_atomic(dir / "histogram.csv", hist.str());

  nlohmann::ordered_json s;
  s["command"] = "rank";
  s["order"] = plan.order;
  for (std::size_t i = 0; i < plan.order.size(); ++i) {
    s["mean_entropy_difference"][plan.order[i]] = plan.mean_differences[i];
  }
  s["outputs"] = {"plan.txt", "entropy.csv", "histogram.csv"};
  write_summary(dir, s);
  for (std::size_t i = 0; i < plan.order.size(); ++i) {
    out << "stage " << i + 1 << " " << plan.order[i] << " mean_entropy_difference=" << format_number(plan.mean_differences[i], 6)
        << "\n";
  }
  return kExitOk;
}

/// Parses "iter=N stage=S sample=D/ID loss=X".
struct LogLine {
  std::uint64_t iteration = 0;
  std::size_t stage = 0;
  std::string sample;
  double loss = 0.0;
};

inline LogLine parse_log_line(const std::string& line) {
  std::istringstream is(line);
  std::map<std::string, std::string> kv;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("train log: malformed token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  for (const char* key : {"iter", "stage", "sample", "loss"})
    if (!kv.count(key)) throw FormatError("train log: line lacks '" + std::string(key) + "': " + line);
  try {
    return {std::stoull(kv["iter"]), std::stoull(kv["stage"]), kv["sample"], parse_number(kv["loss"])};
  } catch (const std::logic_error&) {
    throw FormatError("train log: malformed line: " + line);
  }
}

inline std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::istringstream is(read_file(p));
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

inline int cmd_train(const CliConfig& c, std::ostream& out) {
  require_file(c.manifest, "manifest");
  if (c.order != "ranked" && c.order != "random") throw ConfigError("train: --order must be ranked or random");
  const TrainConfig tc = resolve_train_config(c);
  const fs::path dir = output_dir(c, "train");
  const fs::path resume_from = c.resume ? (c.checkpoint.empty() ? dir / "last.ck" : c.checkpoint) : fs::path();
  if (c.resume) require_file(resume_from, "checkpoint");

  const Manifest m = load_manifest(c.manifest);
  CurriculumPlan plan = rank_datasets(describe_all(m), tc.harvest.decay);
  if (c.order == "random") plan = shuffled_plan(plan, tc.seed);
  const std::vector<StageSpec> stages = plan_stages(plan, tc.harvest, tc.schedule);
  for (const StageSpec& s : stages) {
    for (const SampleRecord& r : m.find(s.dataset).train) {
      const SamplePair p = load_pair(m, r);
      const Shape sh = p.degraded.shape();
      if (s.crop_size > sh.h || s.crop_size > sh.w) {
        throw ConfigError("train: crop " + std::to_string(s.crop_size) + " exceeds " + s.dataset + "/" + r.id + " (" +
                          std::to_string(sh.h) + "x" + std::to_string(sh.w) + ")");
      }
    }
  }

  std::optional<TrainState> resume;
  std::vector<ChallengeArchive> prior;
  std::vector<std::string> log;
  if (c.resume) {
    resume = load_checkpoint(resume_from);
    for (std::size_t k = 1; k < resume->stage; ++k) {
      prior.push_back(load_archive(dir / ("archive_stage_" + std::to_string(k) + ".txt")));
    }
    if (fs::exists(dir / "train.log")) {
      for (const std::string& line : read_lines(dir / "train.log"))
        if (parse_log_line(line).iteration <= resume->iteration) log.push_back(line);
    }
    if (log.size() != resume->iteration) throw DataError("train: log does not cover the checkpoint's iterations");
  }

  write_file_atomic(dir / "plan.txt", plan_to_text(plan, tc.harvest, stages));
  TrainHooks hooks;
  hooks.stage.on_step = [&](const StepRecord& r) { log.push_back(format_step(r)); };
  struct Interrupted {};
  hooks.stage.checkpoint_every = c.stop_after > 0 ? 1 : c.checkpoint_every;
  hooks.stage.on_checkpoint = [&](const TrainState& st) {
    const bool stop = c.stop_after > 0 && st.iteration == c.stop_after;
    const bool due = c.checkpoint_every > 0 && st.iteration % c.checkpoint_every == 0;
    if (stop || due) {
      save_checkpoint(dir / "last.ck", st);
      write_file_atomic(dir / "train.log", join_lines(log));
    }
    if (stop) throw Interrupted{};
    return due ? (dir / "last.ck").string() : std::string();
  };
  hooks.on_archive = [&](const ChallengeArchive& a) {
    save_archive(a, dir / ("archive_stage_" + std::to_string(a.stage) + ".txt"));
  };
  hooks.on_stage_end = [&](const TrainState& st, const StageMetrics& row) {
    const fs::path ck = dir / ("stage_" + std::to_string(row.stage) + ".ck");
    save_checkpoint(ck, st);
    save_checkpoint(dir / "last.ck", st);
    write_file_atomic(dir / "train.log", join_lines(log));
    out << "stage " << row.stage << " " << row.trained_on << " done:";
    for (const auto& [name, r] : row.reports) out << " " << name << ".psnr=" << format_number(r.psnr, 4);
    out << "\n";
    return ck.string();
  };
  std::optional<TrainResult> finished;
  try {
    finished = train_review_learning(tc, m, stages, hooks, std::move(resume), prior);
  } catch (const Interrupted&) {
    out << "stopped after iteration " << c.stop_after << "; resume with --resume\n";
    return kExitOk;
  }
  const TrainResult& result = *finished;

  KvText metrics;
  put_metrics(metrics, result.state.metrics);
  write_file_atomic(dir / "stage_metrics.txt", metrics.str());
  const std::string grid = format_metric_grid(result.state.metrics);
  write_file_atomic(dir / "metrics.tsv", grid);

  nlohmann::ordered_json s;
  s["command"] = "train";
  s["seed"] = tc.seed;
  s["scale"] = tc.schedule.scale;
  s["preset"] = preset_name(tc.model);
  s["order"] = c.order;
  s["review_fraction"] = tc.harvest.top_fraction;
  s["iterations"] = result.state.iteration;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    s["stages"].push_back({{"index", stages[i].index},
                           {"dataset", stages[i].dataset},
                           {"iterations", stages[i].iterations},
                           {"harvest", to_string(stages[i].rule)},
                           {"review", stages[i].review},
                           {"archive_size", result.archives[i].entries.size()}});
  }
  for (const auto& [name, r] : result.state.metrics.back().reports) s["final"][name] = report_json(r);
  s["outputs"] = {"plan.txt", "train.log", "metrics.tsv", "stage_metrics.txt", "last.ck"};
  write_summary(dir, s);
  out << grid;
  return kExitOk;
}

inline int cmd_harvest(const CliConfig& c, std::ostream& out) {
  require_file(c.manifest, "manifest");
  require_file(c.checkpoint, "checkpoint");
  if (c.dataset.empty()) throw ConfigError("harvest: --dataset is required");
  const HarvestRule rule = parse_harvest_rule(c.rule);
  if (rule == HarvestRule::none) throw ConfigError("harvest: rule must be loss or entropy");
  TrainConfig tc = resolve_train_config(c);
  const Manifest m = load_manifest(c.manifest);
  const DatasetEntry& d = m.find(c.dataset);
  ChallengeArchive a;
  if (rule == HarvestRule::loss) {
    const TrainState st = load_checkpoint(c.checkpoint);
    std::map<std::string, double> losses;
    for (const SampleRecord& r : d.train) {
      const SamplePair p = load_pair(m, r);
      losses[r.id] = restoration_loss_value(restore_tiled(p.degraded, st.params, st.config, tc.tiles), p.reference, tc.loss);
    }
    if (losses.empty()) throw DataError("harvest: dataset '" + c.dataset + "' has no training samples");
    a = harvest_by_loss(losses, tc.harvest.kappa, c.stage, c.dataset);
  } else {
    a = harvest_by_entropy(compute_entropy_stats(m, d), tc.harvest.top_fraction, c.stage, c.dataset);
  }
  const fs::path path = c.out.empty() ? output_dir(c, "harvest") / ("archive_" + c.dataset + ".txt") : c.out;
  save_archive(a, path);
  out << "harvested " << a.entries.size() << " of " << d.train.size() << " samples into " << path.string() << "\n";
  return kExitOk;
}

inline int cmd_eval(const CliConfig& c, std::ostream& out) {
  require_file(c.manifest, "manifest");
  require_file(c.checkpoint, "checkpoint");
  const TrainConfig tc = resolve_train_config(c);
  const Manifest m = load_manifest(c.manifest);
  std::vector<std::string> names;
  if (!c.dataset.empty()) names.push_back(m.find(c.dataset).name);
  else
    for (const DatasetEntry& d : m.datasets) names.push_back(d.name);
  const TrainState st = load_checkpoint(c.checkpoint);
  std::string text;
  for (const std::string& n : names) {
    const MetricReport r = evaluate(st.params, st.config, m, n, c.split, tc.loss, tc.tiles);
    text += "dataset=" + n + " " + to_line(r) + "\n";
  }
  if (!c.out.empty()) write_file_atomic(c.out, text);
  out << text;
  return kExitOk;
}

inline int cmd_infer(const CliConfig& c, std::ostream& out) {
  require_file(c.checkpoint, "checkpoint");
  require_file(c.input, "input image");
  if (c.out.empty()) throw ConfigError("infer: --out <image> is required");
  const TrainConfig tc = resolve_train_config(c);
  const TrainState st = load_checkpoint(c.checkpoint);
  const Tensor restored = restore_tiled(to_tensor(load_image(c.input)), st.params, st.config, tc.tiles);
  require_finite(restored, "infer");
  save_image(from_tensor(restored), c.out);
  out << "wrote " << c.out.string() << "\n";
  return kExitOk;
}

inline int cmd_report(const CliConfig& c, std::ostream& out) {
  if (c.runs.empty()) throw ConfigError("report: at least one --run directory is required");
  for (const fs::path& r : c.runs) require_file(r / "stage_metrics.txt", "run metrics");
  std::string text;
  std::vector<std::pair<std::string, std::pair<double, double>>> finals;
  for (const fs::path& run : c.runs) {
    const auto rows = get_metrics(KvText::parse(read_file(run / "stage_metrics.txt")));
    if (rows.empty()) throw DataError("report: run '" + run.string() + "' has no completed stages");
    text += "run " + run.string() + "\n" + format_metric_grid(rows);
    if (fs::exists(run / "train.log")) {
      std::map<std::size_t, std::pair<double, std::size_t>> per_stage;
      for (const std::string& line : read_lines(run / "train.log")) {
        const LogLine l = parse_log_line(line);
        per_stage[l.stage].first += l.loss;
        per_stage[l.stage].second += 1;
      }
      for (const auto& [stage, acc] : per_stage) {
        text += "train_loss stage=" + std::to_string(stage) + " steps=" + std::to_string(acc.second) +
                " mean=" + format_number(acc.first / double(acc.second), 6) + "\n";
      }
    }
    double p = 0.0, s = 0.0;
    for (const auto& [name, r] : rows.back().reports) {
      p += r.psnr;
      s += r.ssim;
    }
    const double n = double(rows.back().reports.size());
    finals.push_back({run.string(), {p / n, s / n}});
    text += "\n";
  }
  text += "run\tfinal.mean.psnr\tfinal.mean.ssim\n";
  for (const auto& [name, v] : finals) text += name + "\t" + format_number(v.first, 4) + "\t" + format_number(v.second, 4) + "\n";
  if (!c.out.empty()) write_file_atomic(c.out, text);
  out << text;
  return kExitOk;
}

// Entry point

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CliConfig c;
  CLI::App app{"SimpleIR all-in-one image restoration with review learning", "simpleir"};
  app.require_subcommand(1, 1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "key = value config file");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--preset", c.preset, "model preset: desk, tiny or paper");
  };
  auto tiling = [&](CLI::App* sub) {
    sub->add_option("--tile", c.tile, "tile size for large images (0 disables tiling)");
    sub->add_option("--overlap", c.overlap, "tile overlap in pixels");
  };

  CLI::App* make = app.add_subcommand("make-data", "generate the synthetic four-task corpus");
  make->add_option("--out", c.out, "output directory");
  make->add_option("--seed", c.seed, "corpus seed");
  make->add_option("--kinds", c.kinds, "degradations (blur lowlight rain snow)")->delimiter(',');
  make->add_option("--train", c.train_count, "training pairs per task");
  make->add_option("--test", c.test_count, "test pairs per task");
  make->add_option("--size", c.image_size, "image side in pixels");

  CLI::App* init = app.add_subcommand("init", "write an initial checkpoint");
  init->add_option("--out", c.out, "checkpoint path")->required();
  init->add_option("--seed", c.seed, "initialization seed");
  init->add_option("--preset", c.preset, "model preset: desk, tiny or paper");
  init->add_flag("--zero", c.zero, "all-zero parameters");

  CLI::App* rank = app.add_subcommand("rank", "entropy statistics and the curriculum plan");
  rank->add_option("--manifest", c.manifest, "manifest.json")->required();
  rank->add_option("--out", c.out, "output directory");
  rank->add_option("--scale", c.scale, "iteration budget multiplier");
  rank->add_option("--review-fraction", c.review_fraction, "top fraction harvested for review");
  common(rank);

  CLI::App* train = app.add_subcommand("train", "sequential review-learning run");
  train->add_option("--manifest", c.manifest, "manifest.json")->required();
  train->add_option("--out", c.out, "run directory");
  train->add_option("--scale", c.scale, "iteration budget multiplier");
  train->add_option("--review-fraction", c.review_fraction, "top fraction harvested for review (0 disables review)");
  train->add_option("--crop", c.crop, "training crop size");
  train->add_option("--order", c.order, "ranked or random");
  train->add_option("--checkpoint-every", c.checkpoint_every, "iterations between last.ck snapshots");
  train->add_option("--checkpoint", c.checkpoint, "checkpoint to resume from (default <out>/last.ck)");
  train->add_flag("--resume", c.resume, "continue from a checkpoint");
  train->add_option("--stop-after", c.stop_after, "write last.ck and stop after this many iterations");
  common(train);
  tiling(train);

  CLI::App* harvest = app.add_subcommand("harvest", "challenge archive from a checkpoint");
  harvest->add_option("--manifest", c.manifest, "manifest.json")->required();
  harvest->add_option("--checkpoint", c.checkpoint, "checkpoint")->required();
  harvest->add_option("--dataset", c.dataset, "dataset name")->required();
  harvest->add_option("--rule", c.rule, "loss or entropy");
  harvest->add_option("--stage", c.stage, "stage recorded in the archive");
  harvest->add_option("--review-fraction", c.review_fraction, "entropy rule fraction");
  harvest->add_option("--out", c.out, "archive path");
  common(harvest);
  tiling(harvest);

  CLI::App* eval = app.add_subcommand("eval", "PSNR / SSIM of a checkpoint on a split");
  eval->add_option("--manifest", c.manifest, "manifest.json")->required();
  eval->add_option("--checkpoint", c.checkpoint, "checkpoint")->required();
  eval->add_option("--dataset", c.dataset, "dataset name (default: all)");
  eval->add_option("--split", c.split, "train or test");
  eval->add_option("--out", c.out, "metrics file");
  common(eval);
  tiling(eval);

  CLI::App* infer = app.add_subcommand("infer", "restore one image");
  infer->add_option("--checkpoint", c.checkpoint, "checkpoint")->required();
  infer->add_option("--in", c.input, "input image (.png or .ppm)")->required();
  infer->add_option("--out", c.out, "output image")->required();
  common(infer);
  tiling(infer);

  CLI::App* report = app.add_subcommand("report", "stage x dataset metric table of training runs");
  report->add_option("--run", c.runs, "run directory (repeatable)")->required();
  report->add_option("--out", c.out, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    if (c.command == "make-data") return cmd_make_data(c, out);
    if (c.command == "init") return cmd_init(c, out);
    if (c.command == "rank") return cmd_rank(c, out);
    if (c.command == "train") return cmd_train(c, out);
    if (c.command == "harvest") return cmd_harvest(c, out);
    if (c.command == "eval") return cmd_eval(c, out);
    if (c.command == "infer") return cmd_infer(c, out);
    if (c.command == "report") return cmd_report(c, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  err << "unknown command '" << c.command << "'\n";
  return kExitUsage;
}

}  // namespace simpleir::cli
