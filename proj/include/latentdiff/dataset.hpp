#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentdiff/tensor.hpp"

namespace latentdiff {

/// Rows of (feature vector, continuous target).
struct LabeledFeatureSet {
  Matrix features;  // n x m
  Vector targets;   // n
  std::string name;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  /// n >= 1, m >= 1, matching lengths, everything finite.
  void validate() const;
  /// Hard error when any target falls outside [y_min, y_max].
  void validate_range(double y_min, double y_max) const;

  LabeledFeatureSet subset(std::span<const Index> rows) const;
};

LabeledFeatureSet make_feature_set(Matrix features, Vector targets, std::string name = {});

/// Concatenates rows; both sets must share the feature width.
LabeledFeatureSet concat(const LabeledFeatureSet& a, const LabeledFeatureSet& b);

/// Reads `f0,...,f{m-1},target[,origin]`. When expected_dim is given the
/// header must carry exactly that many feature columns. A header-only file is
/// an error unless allow_empty is set.
LabeledFeatureSet load_csv(const std::filesystem::path& path,
                           std::optional<Index> expected_dim = std::nullopt, bool allow_empty = false);

/// Writes the same layout with shortest round-trip decimal formatting. A
/// non-empty origin adds an `origin` column holding that value on every row.
void save_csv(const std::filesystem::path& path, const LabeledFeatureSet& set,
              const std::string& origin = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Per-column z-scoring. Constant columns keep std = 1 and are flagged.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(RowVector mean, RowVector stddev, std::vector<bool> constant);

  /// Population statistics; needs at least two rows.
  static Standardizer fit(const Matrix& x);

  Matrix transform(const Matrix& x) const;
  Matrix inverse_transform(const Matrix& z) const;

  bool fitted() const { return fitted_; }
  Index dim() const { return mean_.size(); }
  const RowVector& mean() const { return mean_; }
  const RowVector& stddev() const { return stddev_; }
  const std::vector<bool>& constant() const { return constant_; }
  std::size_t constant_count() const;

 private:
  RowVector mean_;
  RowVector stddev_;
  std::vector<bool> constant_;
  bool fitted_ = false;
};

struct Standardized {
  Standardizer standardizer;
  LabeledFeatureSet set;
};

Standardized standardize_fit_transform(const LabeledFeatureSet& set);

}  // namespace latentdiff
