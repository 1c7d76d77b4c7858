#include "latentdiff/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "latentdiff/binning.hpp"
#include "latentdiff/errors.hpp"
#include "latentdiff/rng.hpp"

namespace latentdiff {

RowVector synthetic_feature_map(double y, Index m, double y_min, double y_max) {
  const double u = (y - y_min) / (y_max - y_min) * 100.0;
  const double base[4] = {u / 100.0, std::sin(u / 10.0), std::cos(u / 15.0), (u / 100.0) * (u / 100.0)};
  RowVector f(m);
  for (Index j = 0; j < m; ++j) {
    if (j < 4) {
      f(j) = base[j];
      continue;
    }
    double v = 0.0;
    for (int i = 0; i < 4; ++i) v += std::sin(static_cast<double>((j - 3) * (i + 1))) * base[i];
    f(j) = v;
  }
  return f;
}

LabeledFeatureSet make_imbalanced_synthetic(const SyntheticConfig& config) {
  if (config.m < 1) throw ConfigError("synthetic: m must be >= 1");
  if (config.bins < 2) throw ConfigError("synthetic: bins must be >= 2");
  if (config.n < config.bins)
    throw ConfigError("synthetic: n (" + std::to_string(config.n) + ") must be >= bins (" +
                      std::to_string(config.bins) + ")");
  if (!(config.decay > 0.0)) throw ConfigError("synthetic: decay must be positive");
  if (config.noise < 0.0) throw ConfigError("synthetic: noise must be non-negative");

  const BinSpec layout(config.y_min, config.y_max, config.bins);
  Rng rng(config.seed, fnv1a64("synthetic"));

  std::vector<double> weights(static_cast<std::size_t>(config.bins));
  for (int k = 0; k < config.bins; ++k) weights[static_cast<std::size_t>(k)] = std::pow(config.decay, k);

  std::vector<int> bin_of(static_cast<std::size_t>(config.n));
  for (int k = 0; k < config.bins; ++k) bin_of[static_cast<std::size_t>(k)] = k;
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  for (Index i = config.bins; i < config.n; ++i) bin_of[static_cast<std::size_t>(i)] = pick(rng.engine());
  std::shuffle(bin_of.begin(), bin_of.end(), rng.engine());

  LabeledFeatureSet set;
  set.name = "synthetic";
  set.features.resize(config.n, config.m);
  set.targets.resize(config.n);
  for (Index i = 0; i < config.n; ++i) {
    const int k = bin_of[static_cast<std::size_t>(i)];
    double y = rng.uniform(layout.edge(k), layout.edge(k + 1));
    y = std::min(y, config.y_max);
    set.targets(i) = y;
    RowVector f = synthetic_feature_map(y, config.m, config.y_min, config.y_max);
    for (Index j = 0; j < config.m; ++j) f(j) += config.noise * rng.normal();
    set.features.row(i) = f;
  }
  set.validate();
  return set;
}

}  // namespace latentdiff
