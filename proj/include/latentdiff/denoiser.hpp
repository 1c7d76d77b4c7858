#pragma once

#include <span>
#include <vector>

#include "latentdiff/layers.hpp"

namespace latentdiff {

struct DenoiserConfig {
  Index feature_dim = 0;
  Index embed_width = 64;    // width of e_y and e_t
  Index target_hidden = 64;  // hidden width of the target MLP
  Index hidden_width = 256;  // trunk width
  int blocks = 3;
  double dropout = 0.1;
};

/// Conditional network g(z_t, y, t):
///   e_y = LayerNorm(MLP(y)), MLP = 1 -> target_hidden (relu) -> embed_width
///   e_t = Affine(SinusoidalPE(t))
///   h   = Affine([z_t, e_y, e_t]) -> residual blocks -> LayerNorm -> Affine -> R^m
/// y is expected already normalized to [0, 1].
class Denoiser {
 public:
  struct Cache {
    const Denoiser* owner = nullptr;
    DenseNet::Cache target;
    Matrix time_pe;
    Matrix trunk_in;
    std::vector<Matrix> block_in;
    std::vector<ResidualBlock::Cache> blocks;
    LayerNorm::Cache out_norm;
    Matrix normed;
  };

  Denoiser() = default;
  Denoiser(const DenoiserConfig& config, Rng& rng);

  const DenoiserConfig& config() const { return config_; }
  Index feature_dim() const { return config_.feature_dim; }

  Matrix forward(const Matrix& z_t, const Vector& y, std::span<const int> t, Mode mode, Rng& rng,
                 Cache& cache) const;
  /// Eval-mode pass without a cache.
  Matrix forward(const Matrix& z_t, const Vector& y, std::span<const int> t) const;

  Grads backward(const Cache& cache, const Matrix& grad_out) const;

  ParamRefs parameters();
  ConstParamRefs parameters() const;
  /// Overwrites every parameter with `values` (same order and shapes).
  void load_parameters(const Grads& values);

 private:
  Matrix embed_inputs(const Matrix& z_t, const Vector& y, std::span<const int> t, Mode mode,
                      Rng& rng, Cache* cache) const;

  DenoiserConfig config_;
  DenseNet target_mlp_;
  Affine time_proj_;
  Affine in_proj_;
  std::vector<ResidualBlock> blocks_;
  LayerNorm out_norm_;
  Affine head_;
};

}  // namespace latentdiff
