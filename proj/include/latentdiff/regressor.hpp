#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentdiff/dataset.hpp"
#include "latentdiff/layers.hpp"
#include "latentdiff/serialize.hpp"

namespace latentdiff {

enum class EncoderKind { mlp, identity };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view text);

struct RegressorConfig {
  EncoderKind encoder = EncoderKind::mlp;
  std::vector<Index> hidden = {256, 128, 64};  // the last width is the feature dimension
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

/// prediction = head(encoder(x)). In identity mode the encoder is the identity
/// map and the features are the inputs themselves.
struct RegressorModel {
  EncoderKind kind = EncoderKind::mlp;
  Standardizer input_scaler;  // mlp mode only
  DenseNet encoder;           // mlp mode only
  Affine head;                // feature_dim -> 1, original target units
  Index input_width = 0;

  Index feature_dim() const { return head.in(); }
  Matrix encode(const Matrix& x) const;
  Vector predict(const Matrix& x) const;
  Vector predict_from_features(const Matrix& z) const;
};

struct VanillaResult {
  RegressorModel model;
  std::vector<double> loss_trace;  // per-epoch mean squared error, standardized targets
};

/// Joint MSE training of encoder and head (mlp mode) or of the head alone
/// (identity mode). Inputs and targets are standardized internally and the
/// target scaling is folded into the head afterwards.
VanillaResult train_vanilla(const LabeledFeatureSet& data, const RegressorConfig& config);

/// Eval-mode encoding of every row, order preserved.
LabeledFeatureSet extract_features(const RegressorModel& model, const LabeledFeatureSet& data);

/// Synthetic fraction r of every training batch. `per_epoch[e]`, when present,
/// overrides `ratio` for epoch e.
struct MixSchedule {
  double ratio = 0.2;
  std::vector<double> per_epoch;

  double ratio_at(int epoch) const;
  void validate() const;
};

/// round(batch * r) synthetic rows per batch.
std::size_t synthetic_rows_per_batch(int batch_size, double ratio);
/// Batches needed to visit every real row once when s rows per batch are synthetic.
std::size_t batches_per_epoch(std::size_t real_rows, int batch_size, std::size_t synthetic_per_batch);

struct HeadTrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;
  bool warm_start = false;  // continue from the initial head instead of a fresh one
  std::uint64_t seed = 0;
};

struct HeadTrainResult {
  Affine head;  // original units
  std::vector<double> loss_trace;
  std::vector<std::size_t> rows_per_epoch;
  std::size_t resampled_rows = 0;  // synthetic rows drawn with replacement, all epochs
};

/// Trains a linear head on batches that each hold batches_per_epoch real rows
/// plus round(batch * r) synthetic rows. When the synthetic set is smaller
/// than an epoch's demand the remainder is drawn with replacement. With r = 0
/// or an empty synthetic set this is plain retraining on the real rows.
HeadTrainResult train_head_augmented(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic,
                                     const MixSchedule& mix, const HeadTrainConfig& config,
                                     const Affine* initial = nullptr);

Json regressor_to_json(const RegressorModel& model);
RegressorModel regressor_from_json(const Json& j);
void save_regressor(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_regressor(const std::filesystem::path& path);

}  // namespace latentdiff
