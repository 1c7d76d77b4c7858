#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentdiff/binning.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/serialize.hpp"

namespace latentdiff {

struct CosineStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t pairs = 0;
  std::size_t excluded_a = 0;  // zero-norm rows dropped from A
  std::size_t excluded_b = 0;
  bool sampled = false;  // true when the pair cap forced random sampling
};

/// Cosine similarity over A x B pairs: every pair when |A||B| <= max_pairs,
/// otherwise max_pairs pairs drawn with a fixed seed. exclude_self skips
/// i == j (for A against itself).
CosineStats cosine_stats(const Matrix& a, const Matrix& b, std::size_t max_pairs, std::uint64_t seed,
                         bool exclude_self = false);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Percentiles interpolate linearly between order statistics; the median of
/// an even-sized sample is the mean of the two middle values.
Summary summarize(std::vector<double> values);

struct NnAnalysis {
  std::vector<Index> neighbor;  // index into the real set, -1 for zero-norm synthetic rows
  std::vector<double> distance;  // 1 - cosine similarity
  std::vector<double> label_gap;  // |y_syn - y_real|
  std::size_t excluded_real = 0;
  std::size_t excluded_synthetic = 0;
  Summary distance_summary;
  Summary label_gap_summary;
};

/// Exact nearest real neighbor of every synthetic row under cosine distance.
NnAnalysis nn_analysis(const LabeledFeatureSet& synthetic, const LabeledFeatureSet& real);

/// Histogram over [lo, hi] with `bins` cells, normalized and smoothed:
/// p_i = (c_i / n + eps) / (1 + bins * eps).
std::vector<double> smoothed_histogram(std::span<const double> values, double lo, double hi, int bins, double eps);
double kl_divergence(std::span<const double> p, std::span<const double> q);
double js_divergence(std::span<const double> p, std::span<const double> q);
/// W1 between two empirical distributions via their quantile functions.
double wasserstein1(std::vector<double> a, std::vector<double> b);

struct BinDivergence {
  int bin = 0;
  std::size_t real_count = 0;
  std::size_t synthetic_count = 0;
  bool computed = false;
  std::string reason;  // why the bin was skipped
  double kl = 0.0;     // KL(real || synthetic)
  double js = 0.0;
  double w1 = 0.0;
};

/// Per bin: project both sets onto the first principal component of the bin's
/// real features and compare the 1-D distributions.
std::vector<BinDivergence> bin_divergences(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic,
                                           const BinSpec& bins, int histogram_bins = 50, double smoothing = 1e-6);

struct PcaResult {
  RowVector mean;
  Matrix components;                    // m x k, unit columns
  std::vector<double> eigenvalues;      // covariance eigenvalues, nonincreasing
  std::vector<double> explained_ratio;  // eigenvalue / trace
};

/// Top-k principal components by power iteration with deflation.
PcaResult pca_variance(const Matrix& x, int k, std::uint64_t seed = 0);
/// Coordinates of x on the first `dims` components (missing components are 0).
Matrix pca_project(const PcaResult& pca, const Matrix& x, int dims = 2);

struct AnalyticsOptions {
  std::size_t max_pairs = 1000000;
  int histogram_bins = 50;
  double smoothing = 1e-6;
  int pca_components = 8;
  std::uint64_t seed = 0;
};

struct QualityReport {
  CosineStats real_real;
  std::optional<CosineStats> synthetic_synthetic;
  std::optional<CosineStats> real_synthetic;
  std::optional<NnAnalysis> nn;
  std::vector<BinDivergence> divergences;
  PcaResult pca_real;
  std::optional<PcaResult> pca_synthetic;
  RowVector real_dim_mean, real_dim_std;
  RowVector synthetic_dim_mean, synthetic_dim_std;

  Json to_json() const;
};

QualityReport quality_report(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic, const BinSpec& bins,
                             const AnalyticsOptions& options);

/// pc1,pc2,origin,label rows for real then synthetic samples, projected on the
/// principal axes of the real features.
void write_projection_csv(const std::filesystem::path& path, const PcaResult& pca, const LabeledFeatureSet& real,
                          const LabeledFeatureSet& synthetic);

}  // namespace latentdiff
