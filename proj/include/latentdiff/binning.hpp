#pragma once

#include <span>
#include <string>
#include <vector>

#include "latentdiff/tensor.hpp"

namespace latentdiff {

/// Equal-width partition of [y_min, y_max] into K bins.
class BinSpec {
 public:
  BinSpec() = default;
  BinSpec(double y_min, double y_max, int bins);

  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  int bins() const { return bins_; }
  double width() const { return (y_max_ - y_min_) / bins_; }

  /// e_k = y_min + k (y_max - y_min) / K, k = 0..K.
  double edge(int k) const;
  /// Midpoint of [e_k, e_{k+1}].
  double center(int k) const;
  std::vector<double> edges() const;
  std::vector<double> centers() const;

  /// floor((y - y_min) / (y_max - y_min) * K), with y_max mapped to K - 1.
  /// Throws RangeError outside [y_min, y_max].
  int index(double y) const;
  std::vector<int> indices(const Vector& targets) const;
  std::vector<std::size_t> counts(const Vector& targets) const;

  /// Maps y to [0, 1] over the declared range.
  double normalize(double y) const { return (y - y_min_) / (y_max_ - y_min_); }

  bool operator==(const BinSpec&) const = default;

 private:
  double y_min_ = 0.0;
  double y_max_ = 1.0;
  int bins_ = 2;
};

enum class Shot { many, median, few };
std::string to_string(Shot shot);

/// Region label per bin from training counts: many > 70, 30..70 median, < 30 few.
struct ShotPartition {
  static constexpr std::size_t kManyAbove = 70;
  static constexpr std::size_t kFewBelow = 30;

  std::vector<Shot> labels;

  Shot label(int bin) const { return labels.at(static_cast<std::size_t>(bin)); }
  bool operator==(const ShotPartition&) const = default;
};

ShotPartition shot_partition(std::span<const std::size_t> counts);

}  // namespace latentdiff
