#pragma once

#include <vector>

#include "latentdiff/binning.hpp"
#include "latentdiff/serialize.hpp"
#include "latentdiff/tensor.hpp"

namespace latentdiff {

struct GateOptions {
  double percentile = 0.95;      // q
  std::size_t min_samples = 5;   // n_min
  double shrinkage = 0.1;        // rho
  /// Switch a bin to diagonal covariance when its sample count is <= m.
  bool diagonal_fallback = true;
};

struct BinGate {
  bool gated = false;
  bool diagonal = false;
  std::size_t samples = 0;
  RowVector mean;
  Matrix covariance;  // regularized
  Matrix cholesky;    // lower factor of covariance
  double threshold = 0.0;
};

/// Per-bin Gaussian model of real (standardized) features. A candidate for
/// bin y is accepted when its Mahalanobis distance to (mu_y, Sigma_y) is at
/// most the q-quantile (nearest rank) of the real within-bin distances.
class QualityGate {
 public:
  struct FilterResult {
    Matrix accepted;
    std::size_t rejected = 0;
    bool ungated = false;
  };

  QualityGate() = default;

  /// Sigma_y = (1 - rho) S + rho (tr(S)/m) I with S the sample covariance.
  /// Throws NumericalError naming the bin when Sigma_y is not positive definite.
  static QualityGate fit(const Matrix& features, const Vector& targets, const BinSpec& bins,
                         const GateOptions& options);

  int bins() const { return static_cast<int>(bins_.size()); }
  const BinGate& bin(int b) const;
  const GateOptions& options() const { return options_; }
  double distance(int b, const RowVector& z) const;
  Vector distances(int b, const Matrix& z) const;

  /// Order-preserving filter of candidate rows for bin b. Ungated bins pass
  /// everything and set FilterResult::ungated so callers can count them.
  FilterResult filter(const Matrix& candidates, int b) const;

  Json summary() const;

 private:
  std::vector<BinGate> bins_;
  GateOptions options_;
};

/// Nearest-rank q-quantile: the ceil(q n)-th smallest value (1-based).
double nearest_rank_quantile(std::vector<double> values, double q);

}  // namespace latentdiff
