#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "latentdiff/binning.hpp"
#include "latentdiff/serialize.hpp"
#include "latentdiff/tensor.hpp"

namespace latentdiff {

enum class Region { all, many, median, few };
inline constexpr std::array<Region, 4> kRegions = {Region::all, Region::many, Region::median, Region::few};
std::string to_string(Region region);

struct RegionMetrics {
  std::size_t count = 0;
  double mae = 0.0;
  double gm = 0.0;
  double mse = 0.0;
  double pearson = 0.0;
  double r2 = 0.0;
  bool pearson_degenerate = false;  // zero variance in predictions or targets
  bool r2_degenerate = false;       // zero target variance
};

inline constexpr double kGmFloor = 1e-8;

/// exp(mean(log(max(|e_i|, floor)))).
double geometric_mean_error(std::span<const double> errors, double floor = kGmFloor);

/// All five metrics over one group of samples. Throws on empty or mismatched input.
RegionMetrics region_metrics(std::span<const double> predictions, std::span<const double> targets);

struct MetricsReport {
  std::string label;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::array<std::optional<RegionMetrics>, 4> regions;  // indexed by Region; empty = no test samples

  const std::optional<RegionMetrics>& region(Region r) const { return regions[static_cast<std::size_t>(r)]; }

  /// Flat keys "mae.all", "gm.few", ...; absent regions map to null.
  Json to_json() const;
  static MetricsReport from_json(const Json& j);
  /// One row per region: region,count,mae,gm,mse,pearson,r2 (absent regions left blank).
  std::string to_csv() const;
};

/// Test samples are binned with `bins` and stratified by the shot labels that
/// were derived from training counts.
MetricsReport compute_metrics(const Vector& predictions, const Vector& targets, const ShotPartition& partition,
                              const BinSpec& bins);

struct MetricDelta {
  std::optional<double> baseline;
  std::optional<double> candidate;
  std::optional<double> delta;             // candidate - baseline
  std::optional<double> relative_percent;  // positive = candidate is better
  std::string reason;                      // set when delta or relative is absent
};

struct DeltaReport {
  std::map<std::string, MetricDelta> entries;  // keyed like "mae.few"
  Json to_json() const;
};

/// Throws ConfigError when a region is present in both reports with different
/// sample counts (the reports were not built on the same partition).
DeltaReport compare_reports(const MetricsReport& baseline, const MetricsReport& candidate);

}  // namespace latentdiff
