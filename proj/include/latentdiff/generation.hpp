#pragma once

#include <cstdint>
#include <vector>

#include "latentdiff/binning.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/diffusion.hpp"
#include "latentdiff/gate.hpp"
#include "latentdiff/priority.hpp"

namespace latentdiff {

struct GenerationOptions {
  double max_attempts_factor = 10.0;
  bool use_ema = true;
  std::uint64_t seed = 0;
  /// Worker threads for the per-bin loops; 0 picks hardware_concurrency.
  unsigned threads = 0;
};

struct BinGenerationReport {
  int bin = 0;
  double center = 0.0;
  std::size_t quota = 0;
  std::size_t achieved = 0;
  std::size_t attempts = 0;
  std::size_t rejected = 0;
  bool gated = false;

  std::size_t shortfall() const { return quota - achieved; }
  double acceptance_rate() const;
};

struct GenerationResult {
  LabeledFeatureSet set;  // original feature units, labels are bin centers
  std::vector<BinGenerationReport> bins;
  std::size_t total_quota = 0;
  std::size_t total_achieved = 0;
  std::size_t ungated_passes = 0;

  Json report_json() const;
};

/// For each bin k with a positive quota, samples at condition c_k and filters
/// through the gate (null gate = no filtering) until the quota is met or the
/// attempts reach max_attempts_factor * quota. Bin k draws from the substream
/// ("generate", k) of the seed, so the output does not depend on scheduling.
GenerationResult generate_augmentation(const DiffusionModel& model, const BinSpec& bins,
                                       const AllocationPlan& plan, const QualityGate* gate,
                                       const GenerationOptions& options);

}  // namespace latentdiff
