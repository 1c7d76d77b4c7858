#include "latentdiff/denoiser.hpp"

#include "latentdiff/errors.hpp"

namespace latentdiff {

Denoiser::Denoiser(const DenoiserConfig& config, Rng& rng) : config_(config) {
  if (config.feature_dim < 1) throw ConfigError("denoiser: feature_dim must be >= 1");
  if (config.embed_width < 2 || config.embed_width % 2 != 0)
    throw ConfigError("denoiser: embed_width must be even");
  if (config.hidden_width < 1 || config.target_hidden < 1 || config.blocks < 0)
    throw ConfigError("denoiser: invalid widths");
  target_mlp_ = DenseNet({{1, config.target_hidden, Activation::relu, false, 0.0},
                          {config.target_hidden, config.embed_width, Activation::identity, true, 0.0}},
                         rng);
  time_proj_ = Affine(config.embed_width, config.embed_width, rng);
  in_proj_ = Affine(config.feature_dim + 2 * config.embed_width, config.hidden_width, rng);
  for (int b = 0; b < config.blocks; ++b) blocks_.emplace_back(config.hidden_width, config.dropout, rng);
  out_norm_ = LayerNorm(config.hidden_width);
  head_ = Affine(config.hidden_width, config.feature_dim, rng);
}

Matrix Denoiser::embed_inputs(const Matrix& z_t, const Vector& y, std::span<const int> t,
                              Mode mode, Rng& rng, Cache* cache) const {
  const Index n = z_t.rows();
  if (z_t.cols() != config_.feature_dim)
    throw DimensionError("denoiser: expected feature width " + std::to_string(config_.feature_dim) +
                         ", got " + std::to_string(z_t.cols()));
  if (y.size() != n || static_cast<Index>(t.size()) != n)
    throw DimensionError("denoiser: z_t, y and t must have the same number of rows");
  if (!z_t.allFinite() || !y.allFinite()) throw NumericalError("denoiser: non-finite input");

  const Matrix y_col = y;
  Matrix e_y = cache != nullptr ? target_mlp_.forward(y_col, mode, rng, cache->target)
                                : target_mlp_.forward(y_col);
  Matrix pe = sinusoidal_embed(t, config_.embed_width);
  Matrix e_t = time_proj_.forward(pe);

  Matrix x(n, config_.feature_dim + 2 * config_.embed_width);
  x << z_t, e_y, e_t;
  if (cache != nullptr) cache->time_pe = std::move(pe);
  return x;
}

Matrix Denoiser::forward(const Matrix& z_t, const Vector& y, std::span<const int> t, Mode mode,
                         Rng& rng, Cache& cache) const {
  cache.owner = this;
  cache.trunk_in = embed_inputs(z_t, y, t, mode, rng, &cache);
  Matrix h = in_proj_.forward(cache.trunk_in);
  cache.block_in.resize(blocks_.size());
  cache.blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    cache.block_in[b] = h;
    h = blocks_[b].forward(h, mode, rng, &cache.blocks[b]);
  }
  cache.normed = out_norm_.forward(h, &cache.out_norm);
  return head_.forward(cache.normed);
}

Matrix Denoiser::forward(const Matrix& z_t, const Vector& y, std::span<const int> t) const {
  Rng unused(0);
  Matrix h = in_proj_.forward(embed_inputs(z_t, y, t, Mode::eval, unused, nullptr));
  for (const ResidualBlock& block : blocks_) h = block.forward(h, Mode::eval, unused, nullptr);
  return head_.forward(out_norm_.forward(h, nullptr));
}

Grads Denoiser::backward(const Cache& cache, const Matrix& grad_out) const {
  if (cache.owner != this) throw Error("Denoiser::backward: cache was produced by a different model");
  if (grad_out.rows() != cache.trunk_in.rows() || grad_out.cols() != config_.feature_dim)
    throw DimensionError("Denoiser::backward: grad_out shape does not match cache");

  Grads grads(parameters().size());
  std::span<Matrix> all(grads);
  // Layout: target mlp, time proj, in proj, blocks..., out norm, head.
  const std::size_t target_n = target_mlp_.tensor_count();
  std::size_t pos = target_n + 2 * Affine::kTensors;
  const std::size_t blocks_at = pos;
  const std::size_t out_norm_at = blocks_at + blocks_.size() * ResidualBlock::kTensors;
  const std::size_t head_at = out_norm_at + LayerNorm::kTensors;

  Matrix g = head_.backward(cache.normed, grad_out, all.subspan(head_at, Affine::kTensors));
  g = out_norm_.backward(cache.out_norm, g, all.subspan(out_norm_at, LayerNorm::kTensors));
  for (std::size_t b = blocks_.size(); b-- > 0;)
    g = blocks_[b].backward(cache.blocks[b], g,
                            all.subspan(blocks_at + b * ResidualBlock::kTensors, ResidualBlock::kTensors));
  g = in_proj_.backward(cache.trunk_in, g, all.subspan(target_n + Affine::kTensors, Affine::kTensors));

  const Index m = config_.feature_dim;
  const Index e = config_.embed_width;
  const Matrix g_time = g.middleCols(m + e, e);
  time_proj_.backward(cache.time_pe, g_time, all.subspan(target_n, Affine::kTensors));
  const Matrix g_target = g.middleCols(m, e);
  target_mlp_.backward(cache.target, g_target, all.subspan(0, target_n));
  return grads;
}

ParamRefs Denoiser::parameters() {
  ParamRefs out;
  target_mlp_.parameters(out);
  time_proj_.parameters(out);
  in_proj_.parameters(out);
  for (ResidualBlock& b : blocks_) b.parameters(out);
  out_norm_.parameters(out);
  head_.parameters(out);
  return out;
}

ConstParamRefs Denoiser::parameters() const {
  ConstParamRefs out;
  target_mlp_.parameters(out);
  time_proj_.parameters(out);
  in_proj_.parameters(out);
  for (const ResidualBlock& b : blocks_) b.parameters(out);
  out_norm_.parameters(out);
  head_.parameters(out);
  return out;
}

void Denoiser::load_parameters(const Grads& values) {
  ParamRefs params = parameters();
  if (values.size() != params.size()) throw DimensionError("Denoiser::load_parameters: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].rows() != params[i]->rows() || values[i].cols() != params[i]->cols())
      throw DimensionError("Denoiser::load_parameters: shape mismatch at tensor " + std::to_string(i));
    *params[i] = values[i];
  }
}

}  // namespace latentdiff
