#include "latentdiff/layers.hpp"

#include <cmath>
#include <string>

#include "latentdiff/errors.hpp"

namespace latentdiff {

namespace {

void require_finite(const Matrix& x, const char* where) {
  if (!x.allFinite()) throw NumericalError(std::string(where) + ": non-finite input");
}

void require_width(const Matrix& x, Index width, const char* where) {
  if (x.cols() != width)
    throw DimensionError(std::string(where) + ": expected width " + std::to_string(width) +
                         ", got " + std::to_string(x.cols()));
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& activated, const Matrix& grad) {
  return (activated.array() > 0.0).select(grad, 0.0);
}

}  // namespace

RowVector sinusoidal_embed(double t, Index dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw ConfigError("sinusoidal_embed: dim must be positive and even, got " +
                      std::to_string(dim));
  if (t < 0) throw RangeError("sinusoidal_embed: timestep must be non-negative");
  RowVector out(dim);
  const Index half = dim / 2;
  for (Index i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    out(2 * i) = std::sin(t * freq);
    out(2 * i + 1) = std::cos(t * freq);
  }
  return out;
}

Matrix sinusoidal_embed(std::span<const int> timesteps, Index dim) {
  Matrix out(static_cast<Index>(timesteps.size()), dim);
  for (std::size_t r = 0; r < timesteps.size(); ++r)
    out.row(static_cast<Index>(r)) = sinusoidal_embed(static_cast<double>(timesteps[r]), dim);
  return out;
}

// ---------------------------------------------------------------- Affine

Affine::Affine(Index in, Index out, Rng& rng) : weight(in, out), bias(Matrix::Zero(1, out)) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (Index r = 0; r < in; ++r)
    for (Index c = 0; c < out; ++c) weight(r, c) = rng.uniform(-scale, scale);
}

Affine Affine::identity(Index n) {
  Affine a;
  a.weight = Matrix::Identity(n, n);
  a.bias = Matrix::Zero(1, n);
  return a;
}

Matrix Affine::forward(const Matrix& x) const {
  require_width(x, in(), "Affine::forward");
  Matrix y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

Matrix Affine::backward(const Matrix& x, const Matrix& grad_out, std::span<Matrix> grads) const {
  grads[0].noalias() = x.transpose() * grad_out;
  grads[1] = grad_out.colwise().sum();
  return grad_out * weight.transpose();
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(Index dim) : gain(Matrix::Ones(1, dim)), bias(Matrix::Zero(1, dim)) {}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
  require_width(x, dim(), "LayerNorm::forward");
  const double d = static_cast<double>(x.cols());
  Vector mean = x.rowwise().sum() / d;
  Matrix centered = x.colwise() - mean;
  Vector inv_std =
      ((centered.array().square().rowwise().sum() / d) + kEps).rsqrt().matrix();
  Matrix normalized = centered.array().colwise() * inv_std.array();
  Matrix y = normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& grad_out,
                           std::span<Matrix> grads) const {
  const Matrix& xhat = cache.normalized;
  grads[0] = (grad_out.array() * xhat.array()).colwise().sum();
  grads[1] = grad_out.colwise().sum();
  const double d = static_cast<double>(xhat.cols());
  Matrix dxhat = grad_out.array().rowwise() * gain.row(0).array();
  Vector sum_dxhat = dxhat.rowwise().sum();
  Vector sum_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().sum();
  Matrix dx = (d * dxhat.array()).matrix();
  dx.colwise() -= sum_dxhat;
  dx -= (xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
  dx = (dx.array().colwise() * (cache.inv_std.array() / d)).matrix();
  return dx;
}

// ---------------------------------------------------------------- Dropout

Matrix dropout_mask(Index rows, Index cols, double rate, Mode mode, Rng& rng) {
  if (mode == Mode::eval || rate <= 0.0) return {};
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const double keep = 1.0 - rate;
  Matrix mask(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

// ---------------------------------------------------------------- DenseNet

DenseNet::DenseNet(std::vector<LayerSpec> specs, Rng& rng) : specs_(std::move(specs)) {
  if (specs_.empty()) throw ConfigError("DenseNet needs at least one layer");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const LayerSpec& s = specs_[i];
    if (s.in <= 0 || s.out <= 0) throw ConfigError("DenseNet: layer widths must be positive");
    if (i > 0 && specs_[i - 1].out != s.in)
      throw DimensionError("DenseNet: layer " + std::to_string(i) + " input width " +
                           std::to_string(s.in) + " does not chain with previous output " +
                           std::to_string(specs_[i - 1].out));
    if (s.dropout < 0.0 || s.dropout >= 1.0)
      throw ConfigError("DenseNet: dropout must be in [0, 1)");
    affine_.emplace_back(s.in, s.out, rng);
    norm_.emplace_back(s.layer_norm ? s.out : 0);
  }
}

Index DenseNet::in_dim() const { return specs_.empty() ? 0 : specs_.front().in; }
Index DenseNet::out_dim() const { return specs_.empty() ? 0 : specs_.back().out; }

std::size_t DenseNet::tensor_count() const {
  std::size_t n = 0;
  for (const LayerSpec& s : specs_) n += Affine::kTensors + (s.layer_norm ? LayerNorm::kTensors : 0);
  return n;
}

Matrix DenseNet::forward(const Matrix& x, Mode mode, Rng& rng, Cache& cache) const {
  require_width(x, in_dim(), "DenseNet::forward");
  require_finite(x, "DenseNet::forward");
  cache.owner = this;
  cache.layers.assign(specs_.size(), {});
  Matrix h = x;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    LayerCache& lc = cache.layers[i];
    lc.input = h;
    h = affine_[i].forward(h);
    if (specs_[i].activation == Activation::relu) h = relu(h);
    lc.activated = h;
    if (specs_[i].layer_norm) h = norm_[i].forward(h, &lc.norm);
    lc.mask = dropout_mask(h.rows(), h.cols(), specs_[i].dropout, mode, rng);
    if (lc.mask.size() > 0) h = h.cwiseProduct(lc.mask);
  }
  return h;
}

Matrix DenseNet::forward(const Matrix& x) const {
  require_width(x, in_dim(), "DenseNet::forward");
  require_finite(x, "DenseNet::forward");
  Matrix h = x;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    h = affine_[i].forward(h);
    if (specs_[i].activation == Activation::relu) h = relu(h);
    if (specs_[i].layer_norm) h = norm_[i].forward(h, nullptr);
  }
  return h;
}

Matrix DenseNet::backward(const Cache& cache, const Matrix& grad_out,
                          std::span<Matrix> grads) const {
  if (cache.owner != this || cache.layers.size() != specs_.size())
    throw Error("DenseNet::backward: cache was produced by a different network");
  if (grads.size() != tensor_count())
    throw DimensionError("DenseNet::backward: gradient slot count mismatch");
  if (grad_out.cols() != out_dim() || grad_out.rows() != cache.layers.front().input.rows())
    throw DimensionError("DenseNet::backward: grad_out shape does not match cache");

  // Parameter order per layer: affine (W, b) then norm (gain, bias).
  std::vector<std::size_t> offset(specs_.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    offset[i] = pos;
    pos += Affine::kTensors + (specs_[i].layer_norm ? LayerNorm::kTensors : 0);
  }

  Matrix g = grad_out;
  for (std::size_t i = specs_.size(); i-- > 0;) {
    const LayerCache& lc = cache.layers[i];
    if (lc.mask.size() > 0) g = g.cwiseProduct(lc.mask);
    if (specs_[i].layer_norm)
      g = norm_[i].backward(lc.norm, g, grads.subspan(offset[i] + Affine::kTensors, LayerNorm::kTensors));
    if (specs_[i].activation == Activation::relu) g = relu_backward(lc.activated, g);
    g = affine_[i].backward(lc.input, g, grads.subspan(offset[i], Affine::kTensors));
  }
  return g;
}

Grads DenseNet::backward(const Cache& cache, const Matrix& grad_out) const {
  Grads grads(tensor_count());
  backward(cache, grad_out, grads);
  return grads;
}

void DenseNet::parameters(ParamRefs& out) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    affine_[i].parameters(out);
    if (specs_[i].layer_norm) norm_[i].parameters(out);
  }
}

void DenseNet::parameters(ConstParamRefs& out) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    affine_[i].parameters(out);
    if (specs_[i].layer_norm) norm_[i].parameters(out);
  }
}

ParamRefs DenseNet::parameters() {
  ParamRefs out;
  parameters(out);
  return out;
}

ConstParamRefs DenseNet::parameters() const {
  ConstParamRefs out;
  parameters(out);
  return out;
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(Index width, double dropout_rate, Rng& rng)
    : norm(width), expand(width, width, rng), project(width, width, rng), dropout(dropout_rate) {}

Matrix ResidualBlock::forward(const Matrix& x, Mode mode, Rng& rng, Cache* cache) const {
  require_width(x, width(), "ResidualBlock::forward");
  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  c.normed = norm.forward(x, &c.norm);
  c.hidden = relu(expand.forward(c.normed));
  c.mask = dropout_mask(c.hidden.rows(), c.hidden.cols(), dropout, mode, rng);
  c.dropped = c.mask.size() > 0 ? Matrix(c.hidden.cwiseProduct(c.mask)) : c.hidden;
  return x + project.forward(c.dropped);
}

Matrix ResidualBlock::backward(const Cache& cache, const Matrix& grad_out,
                               std::span<Matrix> grads) const {
  // Parameter order: norm (2), expand (2), project (2).
  Matrix g = project.backward(cache.dropped, grad_out, grads.subspan(4, 2));
  if (cache.mask.size() > 0) g = g.cwiseProduct(cache.mask);
  g = relu_backward(cache.hidden, g);
  g = expand.backward(cache.normed, g, grads.subspan(2, 2));
  g = norm.backward(cache.norm, g, grads.subspan(0, 2));
  return grad_out + g;
}

void ResidualBlock::parameters(ParamRefs& out) {
  norm.parameters(out);
  expand.parameters(out);
  project.parameters(out);
}

void ResidualBlock::parameters(ConstParamRefs& out) const {
  norm.parameters(out);
  expand.parameters(out);
  project.parameters(out);
}

}  // namespace latentdiff
