#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentdiff/diffusion.hpp"
#include "latentdiff/gate.hpp"
#include "latentdiff/priority.hpp"
#include "latentdiff/regressor.hpp"
#include "latentdiff/serialize.hpp"

namespace latentdiff {

struct DataConfig {
  std::string train_csv;  // empty: generate the synthetic benchmark
  std::string test_csv;   // empty with train_csv set: hold out test_fraction of it
  double test_fraction = 0.2;
  Index n = 5000;
  Index m = 8;
  double decay = 0.7;
  double noise = 0.1;
  Index test_n = 2000;  // balanced test set (decay 1)
  int bins = 20;
  /// Target range of the bins. For CSV input, unset bounds are taken from the
  /// data (union of train and test).
  std::optional<double> y_min = 0.0;
  std::optional<double> y_max = 100.0;
};

struct PriorityConfig {
  double lambda = 0.7;
  bool normalize_errors = false;
  AllocationMode mode = AllocationMode::priority;
};

struct GateConfig {
  bool enabled = true;
  GateOptions options;
  double max_attempts_factor = 10.0;
  /// Give no synthetic quota to bins below min_samples; their share goes to
  /// the gated bins. Off means ungated bins generate and pass unfiltered.
  bool skip_ungated = true;
};

struct MixConfig {
  double ratio = 0.2;  // generation ratio r
  std::vector<double> per_epoch;
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;
  bool warm_start = false;
};

struct AnalyticsConfig {
  bool enabled = true;
  std::size_t max_pairs = 1000000;
  int histogram_bins = 50;
  double smoothing = 1e-6;
  int pca_components = 8;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "latentdiff-out";
  DataConfig data;
  RegressorConfig regressor;       // seed is derived from `seed`
  DiffusionTrainConfig diffusion;  // seed is derived from `seed`
  bool sample_with_ema = true;
  PriorityConfig priority;
  GateConfig gate;
  MixConfig mix;
  AnalyticsConfig analytics;
};

struct ParseOptions {
  bool strict = true;  // unknown keys are errors
};

/// Missing keys take their defaults. Errors name the offending key path, e.g.
/// "priority.lambda".
PipelineConfig config_from_json(const Json& j, const ParseOptions& options = {});
PipelineConfig parse_config(const std::filesystem::path& path, const ParseOptions& options = {});
/// Every field, defaults included; parse(serialize(c)) reproduces c.
Json config_to_json(const PipelineConfig& config);
/// Range and consistency checks; throws RangeError/ConfigError naming the key.
void validate_config(const PipelineConfig& config);
/// The serialized config without out_dir, so runs that differ only in where
/// they write produce identical reports.
Json config_snapshot(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

}  // namespace latentdiff
