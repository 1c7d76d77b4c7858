#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentdiff/analytics.hpp"
#include "latentdiff/binning.hpp"
#include "latentdiff/config.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/diffusion.hpp"
#include "latentdiff/gate.hpp"
#include "latentdiff/generation.hpp"
#include "latentdiff/metrics.hpp"
#include "latentdiff/priority.hpp"
#include "latentdiff/regressor.hpp"

namespace latentdiff {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------- in-memory stages

struct DataSplit {
  LabeledFeatureSet train;
  LabeledFeatureSet test;
  BinSpec bins;
};

/// Synthetic benchmark (balanced test set drawn with decay 1) or CSV input.
DataSplit prepare_data(const PipelineConfig& config);

VanillaResult stage_vanilla(const PipelineConfig& config, const LabeledFeatureSet& train);

struct PriorityStage {
  ErrorStats errors;
  PriorityState state;
};

/// Per-bin training errors of the vanilla model and the resulting priorities.
PriorityStage stage_priority(const PipelineConfig& config, const RegressorModel& vanilla,
                             const LabeledFeatureSet& train_features, const BinSpec& bins);

DiffusionTrainResult stage_diffusion(const PipelineConfig& config, const LabeledFeatureSet& train_features,
                                     const BinSpec& bins);

/// Synthetic rows one augmented epoch consumes: round(batch * r) per batch
/// times the number of batches needed to cover the real rows.
std::size_t synthetic_budget(const MixConfig& mix, std::size_t real_rows);

struct GenerationStage {
  std::optional<QualityGate> gate;
  AllocationPlan plan;
  GenerationResult generation;
  std::vector<std::size_t> skipped_bins;  // ungated bins left out of the plan
};

GenerationStage stage_generate(const PipelineConfig& config, const DiffusionModel& model,
                               const LabeledFeatureSet& train_features, const BinSpec& bins,
                               const PriorityState& priority);

struct AugmentStage {
  HeadTrainResult head;
  RegressorModel model;  // vanilla encoder + retrained head
};

AugmentStage stage_augment(const PipelineConfig& config, const RegressorModel& vanilla,
                           const LabeledFeatureSet& train_features, const LabeledFeatureSet& synthetic);

MetricsReport evaluate_model(const PipelineConfig& config, const RegressorModel& model, const LabeledFeatureSet& test,
                             const ShotPartition& partition, const BinSpec& bins, const std::string& label);

struct PipelineResult {
  DataSplit data;
  ShotPartition partition;
  VanillaResult vanilla;
  LabeledFeatureSet train_features;
  PriorityStage priority;
  DiffusionTrainResult diffusion;
  GenerationStage generation;
  AugmentStage augmented;
  MetricsReport vanilla_report;
  MetricsReport augmented_report;
  DeltaReport comparison;
};

/// Every stage in order, without touching the filesystem.
PipelineResult run_in_memory(const PipelineConfig& config);

// ---------------------------------------------------------------- file-based stages

namespace artifact {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kBins = "bins.json";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kVanilla = "vanilla_model.json";
inline constexpr const char* kVanillaTrace = "vanilla_trace.json";
inline constexpr const char* kTrainFeatures = "features_train.csv";
inline constexpr const char* kTestFeatures = "features_test.csv";
inline constexpr const char* kDiffusion = "diffusion_model.json";
inline constexpr const char* kDiffusionTrace = "diffusion_trace.json";
inline constexpr const char* kPriority = "priority.json";
inline constexpr const char* kGate = "gate.json";
inline constexpr const char* kSynthetic = "synthetic.csv";
inline constexpr const char* kGeneration = "generation_report.json";
inline constexpr const char* kAugmented = "augmented_model.json";
inline constexpr const char* kAugmentTrace = "augment_trace.json";
inline constexpr const char* kReportVanilla = "report_vanilla.json";
inline constexpr const char* kReportAugmented = "report_augmented.json";
inline constexpr const char* kReportVanillaCsv = "report_vanilla.csv";
inline constexpr const char* kReportAugmentedCsv = "report_augmented.csv";
inline constexpr const char* kComparison = "comparison.json";
inline constexpr const char* kQuality = "quality.json";
inline constexpr const char* kProjection = "projection.csv";
}  // namespace artifact

enum class Stage { gen_data, train_vanilla, extract, train_diffusion, generate, augment, evaluate };

std::string to_string(Stage stage);
Stage parse_stage(std::string_view text);
const std::vector<Stage>& all_stages();

struct StageOptions {
  bool report_only = false;  // evaluate: metric reports only, no analytics
};

/// Runs one stage against the artifacts in `out_dir`, records it in the
/// manifest, and rethrows failures as StageError after recording them.
void run_stage(Stage stage, const PipelineConfig& config, const std::filesystem::path& out_dir,
               const StageOptions& options = {});

/// All stages in order.
void run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

}  // namespace latentdiff
