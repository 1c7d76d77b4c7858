#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentdiff/binning.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/denoiser.hpp"
#include "latentdiff/optim.hpp"
#include "latentdiff/schedule.hpp"
#include "latentdiff/serialize.hpp"

namespace latentdiff {

/// What the denoiser is trained to output.
enum class Parameterization { velocity, noise };

std::string to_string(Parameterization p);
Parameterization parse_parameterization(std::string_view text);

struct DiffusionTrainConfig {
  int epochs = 150;
  int batch_size = 256;
  double learning_rate = 1e-3;
  Parameterization parameterization = Parameterization::velocity;
  ScheduleKind schedule = ScheduleKind::cosine;
  int timesteps = 50;
  double offset = 0.008;
  double ema_decay = 0.999;
  /// Use min(ema_decay, (1 + n) / (10 + n)) at step n so the shadow does not
  /// stay anchored to the initial weights on short runs.
  bool ema_warmup = true;
  double dropout = 0.1;
  Index hidden_width = 128;
  int blocks = 3;
  Index embed_width = 64;
  Index target_hidden = 64;
  double clamp = 8.0;       // |z0_hat| bound during sampling, standardized units
  double grad_clip = 1.0;   // global-norm clip; <= 0 disables
  /// Row i is drawn with weight n_b(i)^-balance, where n_b is its bin count.
  /// 0 keeps plain shuffled epochs; 1 gives every occupied bin equal mass.
  double balance = 0.5;
  std::uint64_t seed = 0;
};

/// A trained conditional feature generator together with everything needed to
/// sample from it in the original feature units.
struct DiffusionModel {
  Denoiser net;
  EmaShadow ema;
  NoiseSchedule schedule;
  Standardizer standardizer;
  double y_min = 0.0;  // target normalizer: y -> (y - y_min) / (y_max - y_min)
  double y_max = 1.0;
  DiffusionTrainConfig config;
  std::string config_hash;

  Index feature_dim() const { return net.feature_dim(); }
  double normalize_target(double y) const { return (y - y_min) / (y_max - y_min); }
  /// Copy of the network carrying EMA weights (use_ema) or the raw weights.
  Denoiser sampling_net(bool use_ema) const;
};

struct DiffusionTrainResult {
  DiffusionModel model;
  std::vector<double> loss_trace;  // mean per-sample squared error per epoch
};

/// Fits the feature standardizer, then minimizes E||target - g(z_t, y, t)||^2
/// with t uniform over {1..T} and Gaussian eps. The target is v_t for the
/// velocity parameterization and eps for the noise ablation. The EMA shadow
/// is updated after every optimizer step.
DiffusionTrainResult train_diffusion(const Matrix& features, const Vector& targets,
                                     const BinSpec& bins, const DiffusionTrainConfig& config);

/// Ancestral sampling at condition y, returning standardized features.
Matrix sample_standardized(const DiffusionModel& model, double y, Index count, Rng& rng,
                           bool use_ema = true);
/// Sampling with a prepared network (see DiffusionModel::sampling_net).
Matrix sample_with_net(const DiffusionModel& model, const Denoiser& net, double y, Index count, Rng& rng);
/// Same, returning features in original units.
Matrix reverse_sample(const DiffusionModel& model, double y, Index count, std::uint64_t seed,
                      bool use_ema = true);

Json diffusion_config_to_json(const DiffusionTrainConfig& c);
DiffusionTrainConfig diffusion_config_from_json(const Json& j);

Json diffusion_model_to_json(const DiffusionModel& model);
DiffusionModel diffusion_model_from_json(const Json& j);
void save_diffusion_model(const std::filesystem::path& path, const DiffusionModel& model);
DiffusionModel load_diffusion_model(const std::filesystem::path& path);

}  // namespace latentdiff
