#include "latentdiff/priority.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latentdiff/errors.hpp"

namespace latentdiff {

ErrorStats track_errors(const Vector& predictions, const Vector& targets, const BinSpec& bins) {
  if (predictions.size() != targets.size())
    throw DimensionError("track_errors: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  const auto k = static_cast<std::size_t>(bins.bins());
  ErrorStats stats{std::vector<double>(k, 0.0), std::vector<std::size_t>(k, 0), std::vector<bool>(k, false)};
  for (Index i = 0; i < targets.size(); ++i) {
    const auto b = static_cast<std::size_t>(bins.index(targets(i)));
    stats.mean_error[b] += std::abs(predictions(i) - targets(i));
    ++stats.count[b];
  }
  for (std::size_t b = 0; b < k; ++b) {
    if (stats.count[b] > 0) {
      stats.mean_error[b] /= static_cast<double>(stats.count[b]);
      stats.occupied[b] = true;
    }
  }
  return stats;
}

PriorityState priority_scores(std::span<const double> mean_error, std::span<const std::size_t> count,
                              const PriorityOptions& options) {
  if (mean_error.size() != count.size()) throw DimensionError("priority_scores: length mismatch");
  if (!(options.lambda >= 0.0 && options.lambda <= 1.0))
    throw RangeError("priority_scores: lambda must lie in [0, 1]");
  const std::size_t max_count = count.empty() ? 0 : *std::max_element(count.begin(), count.end());
  if (max_count == 0) throw RangeError("priority_scores: at least one bin needs a positive count");

  PriorityState state;
  state.lambda = options.lambda;
  state.count.assign(count.begin(), count.end());
  state.mean_error.assign(mean_error.begin(), mean_error.end());

  double observed_sum = 0.0;
  std::size_t observed = 0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (mean_error[b] < 0.0 || !std::isfinite(mean_error[b]))
      throw RangeError("priority_scores: errors must be finite and non-negative");
    if (count[b] > 0) {
      observed_sum += mean_error[b];
      ++observed;
    }
  }
  const double substitute = observed_sum / static_cast<double>(observed);
  for (std::size_t b = 0; b < count.size(); ++b)
    if (count[b] == 0) state.mean_error[b] = substitute;

  std::vector<double> error = state.mean_error;
  if (options.normalize_errors) {
    const double top = *std::max_element(error.begin(), error.end());
    if (top > 0.0)
      for (double& e : error) e /= top;
  }

  const double lambda = options.lambda;
  state.raw.resize(count.size());
  for (std::size_t b = 0; b < count.size(); ++b) {
    const double scarcity = 1.0 - static_cast<double>(count[b]) / static_cast<double>(max_count);
    state.raw[b] = lambda * error[b] + (1.0 - lambda) * scarcity;
  }
  const double total = std::accumulate(state.raw.begin(), state.raw.end(), 0.0);
  state.probability.resize(count.size());
  if (total > 0.0) {
    for (std::size_t b = 0; b < count.size(); ++b) state.probability[b] = state.raw[b] / total;
  } else {
    state.uniform_fallback = true;
    std::fill(state.probability.begin(), state.probability.end(), 1.0 / static_cast<double>(count.size()));
  }
  return state;
}

std::string to_string(AllocationMode mode) { return mode == AllocationMode::priority ? "priority" : "uniform"; }

AllocationMode parse_allocation_mode(std::string_view text) {
  if (text == "priority") return AllocationMode::priority;
  if (text == "uniform") return AllocationMode::uniform;
  throw ConfigError("unknown allocation mode '" + std::string(text) + "'");
}

AllocationPlan allocate_budget(std::span<const double> probability, std::size_t total, AllocationMode mode) {
  const std::size_t k = probability.size();
  if (k == 0) throw DimensionError("allocate_budget: no bins");
  AllocationPlan plan{std::vector<std::size_t>(k, 0), total, mode};

  if (mode == AllocationMode::uniform) {
    for (std::size_t b = 0; b < k; ++b) plan.quota[b] = total / k + (b < total % k ? 1 : 0);
    return plan;
  }

  std::vector<double> remainder(k);
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < k; ++b) {
    if (probability[b] < 0.0 || !std::isfinite(probability[b]))
      throw RangeError("allocate_budget: probabilities must be finite and non-negative");
    const double exact = static_cast<double>(total) * probability[b];
    const double whole = std::floor(exact);
    plan.quota[b] = static_cast<std::size_t>(whole);
    remainder[b] = exact - whole;
    assigned += plan.quota[b];
  }
  if (assigned > total) throw RangeError("allocate_budget: probabilities sum above 1");
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % k, ++assigned) ++plan.quota[order[i]];
  return plan;
}

}  // namespace latentdiff
