#pragma once

#include <span>
#include <string>
#include <vector>

#include "latentdiff/binning.hpp"
#include "latentdiff/tensor.hpp"

namespace latentdiff {

/// Per-bin mean absolute error and sample count.
struct ErrorStats {
  std::vector<double> mean_error;  // 0 for unoccupied bins
  std::vector<std::size_t> count;
  std::vector<bool> occupied;
};

ErrorStats track_errors(const Vector& predictions, const Vector& targets, const BinSpec& bins);

struct PriorityState {
  std::vector<double> mean_error;  // after empty-bin substitution
  std::vector<std::size_t> count;
  double lambda = 0.7;
  std::vector<double> raw;          // P'
  std::vector<double> probability;  // P
  bool uniform_fallback = false;    // every P' was zero
};

struct PriorityOptions {
  double lambda = 0.7;
  /// Divide the errors by their maximum before mixing with scarcity.
  bool normalize_errors = false;
};

/// P'(y) = lambda * e_y + (1 - lambda) * (1 - n_y / max n), P = P' / sum P'.
/// Empty bins take the mean of the observed errors; all-zero P' gives a
/// uniform P.
PriorityState priority_scores(std::span<const double> mean_error, std::span<const std::size_t> count,
                              const PriorityOptions& options);

enum class AllocationMode { priority, uniform };

std::string to_string(AllocationMode mode);
AllocationMode parse_allocation_mode(std::string_view text);

struct AllocationPlan {
  std::vector<std::size_t> quota;
  std::size_t total = 0;
  AllocationMode mode = AllocationMode::priority;
};

/// priority: largest-remainder rounding of N * P (ties go to the lower bin);
/// uniform: N / K per bin with the first N mod K bins getting one extra.
AllocationPlan allocate_budget(std::span<const double> probability, std::size_t total, AllocationMode mode);

}  // namespace latentdiff
