#pragma once

#include <cstdint>

#include "latentdiff/dataset.hpp"

namespace latentdiff {

/// Long-tailed regression benchmark over [y_min, y_max].
///
/// Bin k (of `bins` equal-width bins) receives samples with density
/// proportional to decay^k, and every bin gets at least one sample. Targets
/// are uniform within their bin. Features are a fixed smooth map of y plus
/// N(0, noise^2) per component:
///
///   u = (y - y_min) / (y_max - y_min) * 100
///   base = [u/100, sin(u/10), cos(u/15), (u/100)^2]
///   f_j = base_j                          for j < 4
///   f_j = sum_i sin((j-3) * (i+1)) base_i  for j >= 4  (fixed mixtures)
///
/// With m < 4 only the leading base components are used.
struct SyntheticConfig {
  Index n = 5000;
  Index m = 8;
  int bins = 20;
  double decay = 0.7;
  double noise = 0.1;
  double y_min = 0.0;
  double y_max = 100.0;
  std::uint64_t seed = 0;
};

/// Noise-free feature map for one target value.
RowVector synthetic_feature_map(double y, Index m, double y_min = 0.0, double y_max = 100.0);

LabeledFeatureSet make_imbalanced_synthetic(const SyntheticConfig& config);

}  // namespace latentdiff
