#pragma once

#include <span>
#include <vector>

#include "latentdiff/rng.hpp"
#include "latentdiff/tensor.hpp"

namespace latentdiff {

enum class Activation { identity, relu };
enum class Mode { train, eval };

/// Interleaved sinusoidal positional encoding: component 2i is
/// sin(t * w_i) and 2i+1 is cos(t * w_i), with w_i = 10000^(-2i/dim).
RowVector sinusoidal_embed(double t, Index dim);
/// One encoding row per timestep.
Matrix sinusoidal_embed(std::span<const int> timesteps, Index dim);

/// y = x W + b, with W stored in x out.
class Affine {
 public:
  static constexpr std::size_t kTensors = 2;

  Affine() = default;
  Affine(Index in, Index out, Rng& rng);
  static Affine identity(Index n);

  Index in() const { return weight.rows(); }
  Index out() const { return weight.cols(); }

  Matrix forward(const Matrix& x) const;
  /// Writes dW, db into grads[0..1] and returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& grad_out, std::span<Matrix> grads) const;

  void parameters(ParamRefs& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  void parameters(ConstParamRefs& out) const {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Matrix weight;
  Matrix bias;  // 1 x out
};

/// Per-sample normalization over the feature dimension with learnable gain/bias.
class LayerNorm {
 public:
  static constexpr std::size_t kTensors = 2;
  static constexpr double kEps = 1e-5;

  struct Cache {
    Matrix normalized;
    Vector inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(Index dim);

  Index dim() const { return gain.cols(); }

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out, std::span<Matrix> grads) const;

  void parameters(ParamRefs& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
  void parameters(ConstParamRefs& out) const {
    out.push_back(&gain);
    out.push_back(&bias);
  }

  Matrix gain;  // 1 x dim
  Matrix bias;  // 1 x dim
};

/// Inverted-dropout mask: entries are 0 or 1/keep. Empty when inactive.
Matrix dropout_mask(Index rows, Index cols, double rate, Mode mode, Rng& rng);

struct LayerSpec {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::relu;
  bool layer_norm = false;  // applied after the activation
  double dropout = 0.0;     // applied last
};

/// Stack of affine -> activation -> [layer norm] -> [dropout] layers.
class DenseNet {
 public:
  struct LayerCache {
    Matrix input;
    Matrix activated;
    LayerNorm::Cache norm;
    Matrix mask;
  };
  struct Cache {
    const DenseNet* owner = nullptr;
    std::vector<LayerCache> layers;
  };

  DenseNet() = default;
  DenseNet(std::vector<LayerSpec> specs, Rng& rng);

  Index in_dim() const;
  Index out_dim() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t tensor_count() const;

  Matrix forward(const Matrix& x, Mode mode, Rng& rng, Cache& cache) const;
  /// Eval-mode forward pass without a cache.
  Matrix forward(const Matrix& x) const;

  /// Fills grads (tensor_count() entries, parameter order) and returns dL/dx.
  Matrix backward(const Cache& cache, const Matrix& grad_out, std::span<Matrix> grads) const;
  Grads backward(const Cache& cache, const Matrix& grad_out) const;

  void parameters(ParamRefs& out);
  void parameters(ConstParamRefs& out) const;
  ParamRefs parameters();
  ConstParamRefs parameters() const;

  std::vector<Affine>& affines() { return affine_; }
  const std::vector<Affine>& affines() const { return affine_; }
  std::vector<LayerNorm>& norms() { return norm_; }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Affine> affine_;
  std::vector<LayerNorm> norm_;  // one per layer; unused when the flag is off
};

/// x + Affine(Dropout(ReLU(Affine(LayerNorm(x))))), width preserved.
class ResidualBlock {
 public:
  static constexpr std::size_t kTensors = LayerNorm::kTensors + 2 * Affine::kTensors;

  struct Cache {
    LayerNorm::Cache norm;
    Matrix normed;
    Matrix hidden;  // after relu, before dropout
    Matrix mask;
    Matrix dropped;
  };

  ResidualBlock() = default;
  ResidualBlock(Index width, double dropout, Rng& rng);

  Index width() const { return expand.in(); }

  Matrix forward(const Matrix& x, Mode mode, Rng& rng, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out, std::span<Matrix> grads) const;

  void parameters(ParamRefs& out);
  void parameters(ConstParamRefs& out) const;

  LayerNorm norm;
  Affine expand;
  Affine project;
  double dropout = 0.0;
};

}  // namespace latentdiff
