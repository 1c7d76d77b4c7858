#include "latentdiff/generation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "latentdiff/errors.hpp"

namespace latentdiff {

double BinGenerationReport::acceptance_rate() const {
  return attempts == 0 ? 0.0 : static_cast<double>(achieved) / static_cast<double>(attempts);
}

Json GenerationResult::report_json() const {
  Json per_bin = Json::array();
  for (const BinGenerationReport& b : bins)
    per_bin.push_back({{"bin", b.bin},
                       {"center", b.center},
                       {"quota", b.quota},
                       {"achieved", b.achieved},
                       {"shortfall", b.shortfall()},
                       {"attempts", b.attempts},
                       {"rejected", b.rejected},
                       {"gated", b.gated},
                       {"acceptance_rate", b.acceptance_rate()}});
  return Json{{"total_quota", total_quota},
              {"total_achieved", total_achieved},
              {"total_shortfall", total_quota - total_achieved},
              {"ungated_passes", ungated_passes},
              {"bins", per_bin}};
}

namespace {

struct BinOutput {
  BinGenerationReport report;
  Matrix standardized;
  std::size_t ungated_passes = 0;
};

BinOutput generate_bin(const Denoiser& net, const DiffusionModel& model, const BinSpec& bins, int k,
                       std::size_t quota, const QualityGate* gate, const GenerationOptions& options) {
  BinOutput out;
  out.report.bin = k;
  out.report.center = bins.center(k);
  out.report.quota = quota;
  out.report.gated = gate != nullptr && gate->bin(k).gated;
  out.standardized.resize(0, model.feature_dim());
  if (quota == 0) return out;

  const auto budget = static_cast<std::size_t>(std::floor(options.max_attempts_factor * static_cast<double>(quota)));
  Rng rng = Rng::substream(options.seed, "generate", static_cast<std::uint64_t>(k));
  std::vector<Matrix> chunks;
  std::size_t accepted = 0;
  while (accepted < quota && out.report.attempts < budget) {
    const std::size_t draw = std::min(quota - accepted, budget - out.report.attempts);
    Matrix candidates = sample_with_net(model, net, out.report.center, static_cast<Index>(draw), rng);
    out.report.attempts += draw;
    if (gate != nullptr) {
      QualityGate::FilterResult f = gate->filter(candidates, k);
      out.report.rejected += f.rejected;
      if (f.ungated) out.ungated_passes += static_cast<std::size_t>(f.accepted.rows());
      candidates = std::move(f.accepted);
    }
    accepted += static_cast<std::size_t>(candidates.rows());
    if (candidates.rows() > 0) chunks.push_back(std::move(candidates));
  }
  out.report.achieved = accepted;
  out.standardized.resize(static_cast<Index>(accepted), model.feature_dim());
  Index row = 0;
  for (const Matrix& c : chunks) {
    out.standardized.middleRows(row, c.rows()) = c;
    row += c.rows();
  }
  return out;
}

}  // namespace

GenerationResult generate_augmentation(const DiffusionModel& model, const BinSpec& bins,
                                       const AllocationPlan& plan, const QualityGate* gate,
                                       const GenerationOptions& options) {
  const int k_bins = bins.bins();
  if (plan.quota.size() != static_cast<std::size_t>(k_bins))
    throw DimensionError("generate_augmentation: plan has " + std::to_string(plan.quota.size()) +
                         " bins, binspec has " + std::to_string(k_bins));
  if (gate != nullptr && gate->bins() != k_bins)
    throw DimensionError("generate_augmentation: gate and binspec disagree on the bin count");
  if (!(options.max_attempts_factor >= 1.0))
    throw ConfigError("generate_augmentation: max_attempts_factor must be >= 1");

  const Denoiser net = model.sampling_net(options.use_ema);
  std::vector<BinOutput> outputs(static_cast<std::size_t>(k_bins));
  unsigned workers = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(k_bins));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (int k = next++; k < k_bins && !failed; k = next++) {
      try {
        outputs[static_cast<std::size_t>(k)] =
            generate_bin(net, model, bins, k, plan.quota[static_cast<std::size_t>(k)], gate, options);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  GenerationResult result;
  std::vector<Matrix> parts;
  std::vector<double> labels;
  for (BinOutput& o : outputs) {
    result.total_quota += o.report.quota;
    result.total_achieved += o.report.achieved;
    result.ungated_passes += o.ungated_passes;
    if (o.report.shortfall() > 0)
      spdlog::warn("generation: bin {} reached {}/{} after {} attempts", o.report.bin, o.report.achieved,
                   o.report.quota, o.report.attempts);
    labels.insert(labels.end(), o.report.achieved, o.report.center);
    if (o.standardized.rows() > 0) parts.push_back(std::move(o.standardized));
    result.bins.push_back(o.report);
  }
  if (result.ungated_passes > 0)
    spdlog::warn("generation: {} samples passed through ungated bins", result.ungated_passes);

  Matrix standardized(static_cast<Index>(result.total_achieved), model.feature_dim());
  Index row = 0;
  for (const Matrix& p : parts) {
    standardized.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  Vector y(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i)) = labels[i];
  const Matrix features = standardized.rows() > 0 ? model.standardizer.inverse_transform(standardized) : standardized;
  if (features.rows() > 0)
    result.set = make_feature_set(features, y, "synthetic");
  else
    result.set = LabeledFeatureSet{Matrix(0, model.feature_dim()), Vector(0), "synthetic"};
  return result;
}

}  // namespace latentdiff
