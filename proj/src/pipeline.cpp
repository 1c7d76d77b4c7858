#include "latentdiff/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <cmath>
#include <numeric>

#include "latentdiff/errors.hpp"
#include "latentdiff/rng.hpp"
#include "latentdiff/synthetic.hpp"

namespace latentdiff {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- in-memory stages

DataSplit prepare_data(const PipelineConfig& config) {
  const DataConfig& d = config.data;
  DataSplit split;
  if (d.train_csv.empty()) {
    SyntheticConfig sc;
    sc.n = d.n;
    sc.m = d.m;
    sc.bins = d.bins;
    sc.decay = d.decay;
    sc.noise = d.noise;
    sc.y_min = *d.y_min;
    sc.y_max = *d.y_max;
    sc.seed = derive_seed(config.seed, "data");
    split.train = make_imbalanced_synthetic(sc);
    split.train.name = "train";
    sc.n = d.test_n;
    sc.decay = 1.0;
    sc.seed = derive_seed(config.seed, "data-test");
    split.test = make_imbalanced_synthetic(sc);
    split.test.name = "test";
    split.bins = BinSpec(sc.y_min, sc.y_max, d.bins);
    return split;
  }

  LabeledFeatureSet train = load_csv(d.train_csv);
  if (!d.test_csv.empty()) {
    split.train = std::move(train);
    split.test = load_csv(d.test_csv, split.train.dim());
  } else {
    if (train.size() < 2) throw ConfigError("data.train_csv: need at least 2 rows to hold out a test split");
    std::vector<Index> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "split"));
    std::shuffle(order.begin(), order.end(), rng.engine());
    auto n_test = static_cast<std::size_t>(std::llround(d.test_fraction * static_cast<double>(order.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, order.size() - 1);
    std::vector<Index> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    split.train = train.subset(train_rows);
    split.test = train.subset(test_rows);
  }
  split.train.name = "train";
  split.test.name = "test";
  const double lo = d.y_min ? *d.y_min : std::min(split.train.targets.minCoeff(), split.test.targets.minCoeff());
  const double hi = d.y_max ? *d.y_max : std::max(split.train.targets.maxCoeff(), split.test.targets.maxCoeff());
  if (!(hi > lo)) throw ConfigError("data: target range is empty; set data.y_min and data.y_max");
  split.bins = BinSpec(lo, hi, d.bins);
  split.train.validate_range(lo, hi);
  split.test.validate_range(lo, hi);
  return split;
}

VanillaResult stage_vanilla(const PipelineConfig& config, const LabeledFeatureSet& train) {
  RegressorConfig rc = config.regressor;
  rc.seed = derive_seed(config.seed, "vanilla");
  return train_vanilla(train, rc);
}

PriorityStage stage_priority(const PipelineConfig& config, const RegressorModel& vanilla,
                             const LabeledFeatureSet& train_features, const BinSpec& bins) {
  PriorityStage out;
  out.errors = track_errors(vanilla.predict_from_features(train_features.features), train_features.targets, bins);
  PriorityOptions po;
  po.lambda = config.priority.lambda;
  po.normalize_errors = config.priority.normalize_errors;
  out.state = priority_scores(out.errors.mean_error, out.errors.count, po);
  return out;
}

DiffusionTrainResult stage_diffusion(const PipelineConfig& config, const LabeledFeatureSet& train_features,
                                     const BinSpec& bins) {
  DiffusionTrainConfig dc = config.diffusion;
  dc.seed = derive_seed(config.seed, "diffusion");
  return train_diffusion(train_features.features, train_features.targets, bins, dc);
}

std::size_t synthetic_budget(const MixConfig& mix, std::size_t real_rows) {
  double ratio = mix.ratio;
  for (double r : mix.per_epoch) ratio = std::max(ratio, r);
  const std::size_t s = synthetic_rows_per_batch(mix.batch_size, ratio);
  if (s == 0) return 0;
  return s * batches_per_epoch(real_rows, mix.batch_size, s);
}

GenerationStage stage_generate(const PipelineConfig& config, const DiffusionModel& model,
                               const LabeledFeatureSet& train_features, const BinSpec& bins,
                               const PriorityState& priority) {
  GenerationStage out;
  const std::size_t budget = synthetic_budget(config.mix, static_cast<std::size_t>(train_features.size()));
  if (config.gate.enabled)
    out.gate = QualityGate::fit(model.standardizer.transform(train_features.features), train_features.targets, bins,
                                config.gate.options);
  std::vector<bool> keep(priority.probability.size(), true);
  if (out.gate && config.gate.skip_ungated) {
    for (std::size_t b = 0; b < keep.size(); ++b) keep[b] = out.gate->bin(b).gated;
    double kept = 0.0;
    for (std::size_t b = 0; b < keep.size(); ++b)
      if (keep[b]) kept += priority.probability[b];
    const bool any = std::find(keep.begin(), keep.end(), true) != keep.end();
    if (!any || (config.priority.mode == AllocationMode::priority && kept <= 0.0)) {
      spdlog::warn("generate: no gated bin can take the budget, ungated bins keep their quota");
      std::fill(keep.begin(), keep.end(), true);
    }
    for (std::size_t b = 0; b < keep.size(); ++b)
      if (!keep[b]) out.skipped_bins.push_back(b);
  }
  if (out.skipped_bins.empty()) {
    out.plan = allocate_budget(priority.probability, budget, config.priority.mode);
  } else {
    std::vector<std::size_t> kept_ids;
    std::vector<double> weight;
    for (std::size_t b = 0; b < keep.size(); ++b)
      if (keep[b]) {
        kept_ids.push_back(b);
        weight.push_back(priority.probability[b]);
      }
    const double sum = std::accumulate(weight.begin(), weight.end(), 0.0);
    for (double& w : weight) w /= sum;
    const AllocationPlan sub = allocate_budget(weight, budget, config.priority.mode);
    out.plan = AllocationPlan{std::vector<std::size_t>(keep.size(), 0), budget, config.priority.mode};
    for (std::size_t i = 0; i < kept_ids.size(); ++i) out.plan.quota[kept_ids[i]] = sub.quota[i];
  }
  if (!out.skipped_bins.empty())
    spdlog::info("generate: {} ungated bins get no synthetic quota", out.skipped_bins.size());
  GenerationOptions go;
  go.max_attempts_factor = config.gate.max_attempts_factor;
  go.use_ema = config.sample_with_ema;
  go.seed = derive_seed(config.seed, "generate");
  out.generation = generate_augmentation(model, bins, out.plan, out.gate ? &*out.gate : nullptr, go);
  return out;
}

AugmentStage stage_augment(const PipelineConfig& config, const RegressorModel& vanilla,
                           const LabeledFeatureSet& train_features, const LabeledFeatureSet& synthetic) {
  HeadTrainConfig hc;
  hc.epochs = config.mix.epochs;
  hc.batch_size = config.mix.batch_size;
  hc.learning_rate = config.mix.learning_rate;
  hc.warm_start = config.mix.warm_start;
  hc.seed = derive_seed(config.seed, "augment");
  AugmentStage out;
  out.head = train_head_augmented(train_features, synthetic, MixSchedule{config.mix.ratio, config.mix.per_epoch}, hc,
                                  &vanilla.head);
  out.model = vanilla;
  out.model.head = out.head.head;
  return out;
}

MetricsReport evaluate_model(const PipelineConfig& config, const RegressorModel& model, const LabeledFeatureSet& test,
                             const ShotPartition& partition, const BinSpec& bins, const std::string& label) {
  MetricsReport report = compute_metrics(model.predict(test.features), test.targets, partition, bins);
  report.label = label;
  report.config_hash = config_hash(config);
  report.seed = config.seed;
  return report;
}

PipelineResult run_in_memory(const PipelineConfig& config) {
  validate_config(config);
  PipelineResult r;
  r.data = prepare_data(config);
  r.partition = shot_partition(r.data.bins.counts(r.data.train.targets));
  r.vanilla = stage_vanilla(config, r.data.train);
  r.train_features = extract_features(r.vanilla.model, r.data.train);
  r.priority = stage_priority(config, r.vanilla.model, r.train_features, r.data.bins);
  r.diffusion = stage_diffusion(config, r.train_features, r.data.bins);
  r.generation = stage_generate(config, r.diffusion.model, r.train_features, r.data.bins, r.priority.state);
  r.augmented = stage_augment(config, r.vanilla.model, r.train_features, r.generation.generation.set);
  r.vanilla_report = evaluate_model(config, r.vanilla.model, r.data.test, r.partition, r.data.bins, "vanilla");
  r.augmented_report = evaluate_model(config, r.augmented.model, r.data.test, r.partition, r.data.bins, "augmented");
  r.comparison = compare_reports(r.vanilla_report, r.augmented_report);
  return r;
}

// ---------------------------------------------------------------- file-based stages

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::gen_data: return "gen-data";
    case Stage::train_vanilla: return "train-vanilla";
    case Stage::extract: return "extract";
    case Stage::train_diffusion: return "train-diffusion";
    case Stage::generate: return "generate";
    case Stage::augment: return "augment";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::gen_data, Stage::train_vanilla, Stage::extract,
                                            Stage::train_diffusion, Stage::generate, Stage::augment,
                                            Stage::evaluate};
  return stages;
}

Stage parse_stage(std::string_view text) {
  for (Stage s : all_stages())
    if (to_string(s) == text) return s;
  throw ConfigError("unknown stage '" + std::string(text) + "'");
}

namespace {

fs::path need(const fs::path& dir, const char* name, Stage producer) {
  fs::path p = dir / name;
  if (!fs::exists(p))
    throw PrerequisiteError("missing " + p.string() + " (run '" + to_string(producer) + "' first)");
  return p;
}

Json trace_json(const std::vector<double>& loss) { return Json{{"loss", loss}}; }

BinSpec load_bins(const fs::path& dir) { return binspec_from_json(read_json(need(dir, artifact::kBins, Stage::gen_data))); }

Json report_json(const MetricsReport& report, const PipelineConfig& config) {
  Json j = report.to_json();
  j["config"] = config_snapshot(config);
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

// Runs the body of one stage and returns the artifacts it wrote.
std::vector<std::string> execute(Stage stage, const PipelineConfig& config, const fs::path& dir,
                                 const StageOptions& options) {
  switch (stage) {
    case Stage::gen_data: {
      const DataSplit split = prepare_data(config);
      save_csv(dir / artifact::kTrain, split.train);
      save_csv(dir / artifact::kTest, split.test);
      write_json(dir / artifact::kBins, binspec_to_json(split.bins));
      write_json(dir / artifact::kConfig, config_to_json(config));
      return {artifact::kTrain, artifact::kTest, artifact::kBins, artifact::kConfig};
    }
    case Stage::train_vanilla: {
      const LabeledFeatureSet train = load_csv(need(dir, artifact::kTrain, Stage::gen_data));
      const VanillaResult v = stage_vanilla(config, train);
      save_regressor(dir / artifact::kVanilla, v.model);
      write_json(dir / artifact::kVanillaTrace, trace_json(v.loss_trace));
      return {artifact::kVanilla, artifact::kVanillaTrace};
    }
    case Stage::extract: {
      const RegressorModel model = load_regressor(need(dir, artifact::kVanilla, Stage::train_vanilla));
      const LabeledFeatureSet train = load_csv(need(dir, artifact::kTrain, Stage::gen_data));
      const LabeledFeatureSet test = load_csv(need(dir, artifact::kTest, Stage::gen_data));
      save_csv(dir / artifact::kTrainFeatures, extract_features(model, train));
      save_csv(dir / artifact::kTestFeatures, extract_features(model, test));
      return {artifact::kTrainFeatures, artifact::kTestFeatures};
    }
    case Stage::train_diffusion: {
      const LabeledFeatureSet features = load_csv(need(dir, artifact::kTrainFeatures, Stage::extract));
      const BinSpec bins = load_bins(dir);
      DiffusionTrainResult d = stage_diffusion(config, features, bins);
      save_diffusion_model(dir / artifact::kDiffusion, d.model);
      write_json(dir / artifact::kDiffusionTrace, trace_json(d.loss_trace));
      return {artifact::kDiffusion, artifact::kDiffusionTrace};
    }
    case Stage::generate: {
      const DiffusionModel model = load_diffusion_model(need(dir, artifact::kDiffusion, Stage::train_diffusion));
      const RegressorModel vanilla = load_regressor(need(dir, artifact::kVanilla, Stage::train_vanilla));
      const LabeledFeatureSet features = load_csv(need(dir, artifact::kTrainFeatures, Stage::extract));
      const BinSpec bins = load_bins(dir);
      const PriorityStage p = stage_priority(config, vanilla, features, bins);
      const GenerationStage g = stage_generate(config, model, features, bins, p.state);

      Json pj{{"lambda", p.state.lambda},
              {"mean_error", p.state.mean_error},
              {"count", p.state.count},
              {"occupied", p.errors.occupied},
              {"raw", p.state.raw},
              {"probability", p.state.probability},
              {"uniform_fallback", p.state.uniform_fallback},
              {"plan",
               {{"mode", to_string(g.plan.mode)},
                {"total", g.plan.total},
                {"quota", g.plan.quota},
                {"skipped_bins", g.skipped_bins}}}};
      write_json(dir / artifact::kPriority, pj);
      write_json(dir / artifact::kGate, g.gate ? g.gate->summary() : Json{{"enabled", false}});
      save_csv(dir / artifact::kSynthetic, g.generation.set, "synthetic");
      write_json(dir / artifact::kGeneration, g.generation.report_json());
      return {artifact::kPriority, artifact::kGate, artifact::kSynthetic, artifact::kGeneration};
    }
    case Stage::augment: {
      const RegressorModel vanilla = load_regressor(need(dir, artifact::kVanilla, Stage::train_vanilla));
      const LabeledFeatureSet features = load_csv(need(dir, artifact::kTrainFeatures, Stage::extract));
      const LabeledFeatureSet synthetic = load_csv(need(dir, artifact::kSynthetic, Stage::generate), features.dim(), true);
      const AugmentStage a = stage_augment(config, vanilla, features, synthetic);
      save_regressor(dir / artifact::kAugmented, a.model);
      write_json(dir / artifact::kAugmentTrace, Json{{"loss", a.head.loss_trace},
                                                     {"rows_per_epoch", a.head.rows_per_epoch},
                                                     {"resampled_rows", a.head.resampled_rows}});
      return {artifact::kAugmented, artifact::kAugmentTrace};
    }
    case Stage::evaluate: {
      const RegressorModel vanilla = load_regressor(need(dir, artifact::kVanilla, Stage::train_vanilla));
      const RegressorModel augmented = load_regressor(need(dir, artifact::kAugmented, Stage::augment));
      const LabeledFeatureSet train = load_csv(need(dir, artifact::kTrain, Stage::gen_data));
      const LabeledFeatureSet test = load_csv(need(dir, artifact::kTest, Stage::gen_data));
      const BinSpec bins = load_bins(dir);
      const ShotPartition partition = shot_partition(bins.counts(train.targets));
      const MetricsReport rv = evaluate_model(config, vanilla, test, partition, bins, "vanilla");
      const MetricsReport ra = evaluate_model(config, augmented, test, partition, bins, "augmented");
      write_json(dir / artifact::kReportVanilla, report_json(rv, config));
      write_json(dir / artifact::kReportAugmented, report_json(ra, config));
      write_text(dir / artifact::kReportVanillaCsv, rv.to_csv());
      write_text(dir / artifact::kReportAugmentedCsv, ra.to_csv());
      write_json(dir / artifact::kComparison, Json{{"baseline", "vanilla"},
                                                   {"candidate", "augmented"},
                                                   {"config_hash", config_hash(config)},
                                                   {"deltas", compare_reports(rv, ra).to_json()}});
      std::vector<std::string> written = {artifact::kReportVanilla, artifact::kReportAugmented,
                                          artifact::kReportVanillaCsv, artifact::kReportAugmentedCsv,
                                          artifact::kComparison};
      if (!options.report_only && config.analytics.enabled) {
        const LabeledFeatureSet features = load_csv(need(dir, artifact::kTrainFeatures, Stage::extract));
        const LabeledFeatureSet synthetic = load_csv(need(dir, artifact::kSynthetic, Stage::generate), features.dim(), true);
        AnalyticsOptions ao;
        ao.max_pairs = config.analytics.max_pairs;
        ao.histogram_bins = config.analytics.histogram_bins;
        ao.smoothing = config.analytics.smoothing;
        ao.pca_components = config.analytics.pca_components;
        ao.seed = derive_seed(config.seed, "analytics");
        const QualityReport q = quality_report(features, synthetic, bins, ao);
        Json qj = q.to_json();
        qj["config_hash"] = config_hash(config);
        write_json(dir / artifact::kQuality, qj);
        write_projection_csv(dir / artifact::kProjection, q.pca_real, features, synthetic);
        written.push_back(artifact::kQuality);
        written.push_back(artifact::kProjection);
      }
      return written;
    }
  }
  throw ConfigError("unknown stage");
}

void record(const fs::path& dir, const PipelineConfig& config, Stage stage, const Json& entry) {
  const fs::path path = dir / artifact::kManifest;
  Json manifest = fs::exists(path) ? read_json(path) : Json::object();
  const std::string hash = config_hash(config);
  if (manifest.contains("config_hash") && manifest["config_hash"] != hash)
    spdlog::warn("manifest: config hash changed from {} to {}; earlier artifacts came from another config",
                 manifest["config_hash"].get<std::string>(), hash);
  manifest["tool"] = "latentdiff";
  manifest["version"] = kToolVersion;
  manifest["seed"] = config.seed;
  manifest["config_hash"] = hash;
  manifest["config"] = config_to_json(config);
  manifest["stages"][to_string(stage)] = entry;
  Json all = Json::object();
  for (const auto& [name, e] : manifest["stages"].items())
    for (const Json& a : e.value("artifacts", Json::array())) all[a.get<std::string>()] = name;
  manifest["artifacts"] = all;
  write_json(path, manifest);
}

}  // namespace

void run_stage(Stage stage, const PipelineConfig& config, const fs::path& out_dir, const StageOptions& options) {
  validate_config(config);
  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  spdlog::info("stage {}: start", to_string(stage));
  try {
    const std::vector<std::string> written = execute(stage, config, out_dir, options);
    record(out_dir, config, stage, Json{{"status", "ok"}, {"seconds", seconds()}, {"artifacts", written}});
    spdlog::info("stage {}: done in {:.2f}s", to_string(stage), seconds());
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    const bool missing = dynamic_cast<const PrerequisiteError*>(&e) != nullptr;
    try {
      record(out_dir, config, stage,
             Json{{"status", "failed"}, {"seconds", seconds()}, {"error", e.what()}, {"artifacts", Json::array()}});
    } catch (const std::exception& inner) {
      spdlog::error("manifest: could not record failure: {}", inner.what());
    }
    throw StageError(to_string(stage), e.what(), missing);
  }
}

void run_pipeline(const PipelineConfig& config, const fs::path& out_dir) {
  for (Stage s : all_stages()) run_stage(s, config, out_dir);
}

}  // namespace latentdiff
