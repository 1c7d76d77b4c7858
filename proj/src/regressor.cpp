#include "latentdiff/regressor.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latentdiff/errors.hpp"
#include "latentdiff/optim.hpp"
#include "latentdiff/rng.hpp"

namespace latentdiff {

std::string to_string(EncoderKind kind) { return kind == EncoderKind::mlp ? "mlp" : "identity"; }

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "mlp") return EncoderKind::mlp;
  if (text == "identity") return EncoderKind::identity;
  throw ConfigError("unknown encoder kind '" + std::string(text) + "' (expected mlp or identity)");
}

Matrix RegressorModel::encode(const Matrix& x) const {
  if (x.cols() != input_width)
    throw DimensionError("regressor: expected input width " + std::to_string(input_width) + ", got " +
                         std::to_string(x.cols()));
  if (kind == EncoderKind::identity) return x;
  return encoder.forward(input_scaler.transform(x));
}

Vector RegressorModel::predict_from_features(const Matrix& z) const {
  if (z.cols() != feature_dim())
    throw DimensionError("regressor head: expected feature width " + std::to_string(feature_dim()) + ", got " +
                         std::to_string(z.cols()));
  return head.forward(z).col(0);
}

Vector RegressorModel::predict(const Matrix& x) const { return predict_from_features(encode(x)); }

namespace {

struct Scaling {
  RowVector mean;
  RowVector scale;
};

// Population mean/std per column; near-constant columns keep scale 1.
Scaling column_scaling(const Matrix& x) {
  Scaling s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
  for (Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  return s;
}

struct TargetScaling {
  double mean = 0.0;
  double scale = 1.0;
};

TargetScaling target_scaling(const Vector& y) {
  TargetScaling t;
  t.mean = y.mean();
  const double var = (y.array() - t.mean).square().mean();
  t.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  return t;
}

// Head in standardized space -> head in original units.
Affine fold_head(const Affine& h, const Scaling& x, const TargetScaling& y) {
  Affine out = h;
  double shift = 0.0;
  for (Index i = 0; i < h.in(); ++i) {
    out.weight(i, 0) = y.scale * h.weight(i, 0) / x.scale(i);
    shift += h.weight(i, 0) * x.mean(i) / x.scale(i);
  }
  out.bias(0, 0) = y.scale * (h.bias(0, 0) - shift) + y.mean;
  return out;
}

Affine unfold_head(const Affine& h, const Scaling& x, const TargetScaling& y) {
  Affine out = h;
  double shift = 0.0;
  for (Index i = 0; i < h.in(); ++i) {
    out.weight(i, 0) = h.weight(i, 0) * x.scale(i) / y.scale;
    shift += out.weight(i, 0) * x.mean(i) / x.scale(i);
  }
  out.bias(0, 0) = (h.bias(0, 0) - y.mean) / y.scale + shift;
  return out;
}

void check_loss(double loss, const char* stage, int epoch) {
  if (!std::isfinite(loss))
    throw NumericalError(std::string(stage) + ": non-finite loss at epoch " + std::to_string(epoch));
}

void gather_rows(const Matrix& src, std::span<const Index> rows, Matrix& dst, Index offset) {
  for (std::size_t i = 0; i < rows.size(); ++i) dst.row(offset + static_cast<Index>(i)) = src.row(rows[i]);
}

void validate_training(int epochs, int batch_size, double lr, const char* stage) {
  if (epochs < 1) throw ConfigError(std::string(stage) + ": epochs must be >= 1");
  if (batch_size < 1) throw ConfigError(std::string(stage) + ": batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError(std::string(stage) + ": learning_rate must be positive");
}

}  // namespace

// ---------------------------------------------------------------- mix schedule

double MixSchedule::ratio_at(int epoch) const {
  if (epoch >= 0 && static_cast<std::size_t>(epoch) < per_epoch.size()) return per_epoch[static_cast<std::size_t>(epoch)];
  return ratio;
}

void MixSchedule::validate() const {
  auto check = [](double r) {
    if (!(r >= 0.0 && r < 1.0)) throw RangeError("mix: synthetic ratio must lie in [0, 1), got " + format_double(r));
  };
  check(ratio);
  for (double r : per_epoch) check(r);
}

std::size_t synthetic_rows_per_batch(int batch_size, double ratio) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(batch_size) * ratio));
}

std::size_t batches_per_epoch(std::size_t real_rows, int batch_size, std::size_t synthetic_per_batch) {
  const auto b = static_cast<std::size_t>(batch_size);
  if (synthetic_per_batch >= b) throw RangeError("mix: batch has no room for real rows");
  const std::size_t real_per_batch = b - synthetic_per_batch;
  return (real_rows + real_per_batch - 1) / real_per_batch;
}

// ---------------------------------------------------------------- head training

HeadTrainResult train_head_augmented(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic,
                                     const MixSchedule& mix, const HeadTrainConfig& config, const Affine* initial) {
  validate_training(config.epochs, config.batch_size, config.learning_rate, "head");
  mix.validate();
  real.validate();
  if (real.size() < 1) throw ConfigError("head: no real rows");
  if (synthetic.size() > 0 && synthetic.dim() != real.dim())
    throw DimensionError("head: synthetic width " + std::to_string(synthetic.dim()) + " differs from real width " +
                         std::to_string(real.dim()));
  if (config.warm_start && initial == nullptr) throw ConfigError("head: warm_start needs an initial head");
  if (initial != nullptr && initial->in() != real.dim())
    throw DimensionError("head: initial head width does not match the features");

  const Index m = real.dim();
  const Scaling xs = column_scaling(real.features);
  const TargetScaling ys = target_scaling(real.targets);
  auto scale_x = [&](const Matrix& x) -> Matrix {
    return ((x.rowwise() - xs.mean).array().rowwise() / xs.scale.array()).matrix();
  };
  const Matrix real_x = scale_x(real.features);
  const Vector real_y = ((real.targets.array() - ys.mean) / ys.scale).matrix();
  Matrix syn_x;
  Vector syn_y;
  if (synthetic.size() > 0) {
    syn_x = scale_x(synthetic.features);
    syn_y = ((synthetic.targets.array() - ys.mean) / ys.scale).matrix();
  }

  Rng rng = Rng::substream(config.seed, "head", 0);
  Affine head = Affine(m, 1, rng);
  if (config.warm_start) head = unfold_head(*initial, xs, ys);
  ParamRefs params;
  head.parameters(params);
  Adam adam(to_const(params), AdamConfig{config.learning_rate});

  HeadTrainResult result;
  const auto n_real = static_cast<std::size_t>(real.size());
  const auto n_syn = static_cast<std::size_t>(synthetic.size());
  std::vector<Index> real_order(n_real);
  std::vector<Index> syn_order(n_syn);
  std::iota(syn_order.begin(), syn_order.end(), 0);
  Grads grads(2);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double r = mix.ratio_at(epoch);
    const std::size_t s = n_syn > 0 ? synthetic_rows_per_batch(config.batch_size, r) : 0;
    const std::size_t batches = batches_per_epoch(n_real, config.batch_size, s);
    const std::size_t real_per_batch = static_cast<std::size_t>(config.batch_size) - s;

    std::iota(real_order.begin(), real_order.end(), 0);
    std::shuffle(real_order.begin(), real_order.end(), rng.engine());
    // Synthetic demand for this epoch: a fresh permutation, topped up with
    // replacement draws when the set is smaller than the demand.
    std::vector<Index> syn_draw;
    const std::size_t demand = s * batches;
    if (demand > 0) {
      std::shuffle(syn_order.begin(), syn_order.end(), rng.engine());
      syn_draw.assign(syn_order.begin(), syn_order.begin() + static_cast<std::ptrdiff_t>(std::min(demand, n_syn)));
      if (demand > n_syn) {
        const std::size_t extra = demand - n_syn;
        for (std::size_t i = 0; i < extra; ++i) syn_draw.push_back(static_cast<Index>(rng.index(n_syn)));
        result.resampled_rows += extra;
      }
    }

    double loss_sum = 0.0;
    std::size_t rows_seen = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t r0 = b * real_per_batch;
      const std::size_t r1 = std::min(n_real, r0 + real_per_batch);
      const auto nr = static_cast<Index>(r1 - r0);
      const auto ns = static_cast<Index>(s);
      Matrix xb(nr + ns, m);
      Vector yb(nr + ns);
      const std::span<const Index> rrows(real_order.data() + r0, r1 - r0);
      gather_rows(real_x, rrows, xb, 0);
      for (Index i = 0; i < nr; ++i) yb(i) = real_y(rrows[static_cast<std::size_t>(i)]);
      if (ns > 0) {
        const std::span<const Index> srows(syn_draw.data() + b * s, s);
        gather_rows(syn_x, srows, xb, nr);
        for (Index i = 0; i < ns; ++i) yb(nr + i) = syn_y(srows[static_cast<std::size_t>(i)]);
      }
      const Matrix pred = head.forward(xb);
      const Matrix diff = pred.col(0) - yb;
      const double rows = static_cast<double>(xb.rows());
      loss_sum += diff.squaredNorm();
      rows_seen += static_cast<std::size_t>(xb.rows());
      head.backward(xb, (2.0 / rows) * diff, grads);
      adam.step(params, grads);
    }
    const double loss = loss_sum / static_cast<double>(rows_seen);
    check_loss(loss, "head", epoch);
    result.loss_trace.push_back(loss);
    result.rows_per_epoch.push_back(rows_seen);
  }
  if (result.resampled_rows > 0)
    spdlog::info("head: {} synthetic rows drawn with replacement over {} epochs ({} available)",
                 result.resampled_rows, config.epochs, n_syn);
  result.head = fold_head(head, xs, ys);
  return result;
}

// ---------------------------------------------------------------- vanilla

VanillaResult train_vanilla(const LabeledFeatureSet& data, const RegressorConfig& config) {
  validate_training(config.epochs, config.batch_size, config.learning_rate, "vanilla");
  data.validate();
  if (data.size() < 2) throw ConfigError("vanilla: need at least 2 rows");

  VanillaResult out;
  RegressorModel& model = out.model;
  model.kind = config.encoder;
  model.input_width = data.dim();

  if (config.encoder == EncoderKind::identity) {
    HeadTrainConfig hc;
    hc.epochs = config.epochs;
    hc.batch_size = config.batch_size;
    hc.learning_rate = config.learning_rate;
    hc.seed = config.seed;
    HeadTrainResult h = train_head_augmented(data, LabeledFeatureSet{}, MixSchedule{0.0, {}}, hc);
    model.head = std::move(h.head);
    out.loss_trace = std::move(h.loss_trace);
    return out;
  }

  if (config.hidden.empty()) throw ConfigError("vanilla: mlp encoder needs at least one hidden width");
  std::vector<LayerSpec> specs;
  Index in = data.dim();
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    const bool last = i + 1 == config.hidden.size();
    specs.push_back(LayerSpec{in, config.hidden[i], Activation::relu, false, last ? 0.0 : config.dropout});
    in = config.hidden[i];
  }
  Rng rng = Rng::substream(config.seed, "vanilla", 0);
  model.encoder = DenseNet(specs, rng);
  Affine head(in, 1, rng);

  model.input_scaler = Standardizer::fit(data.features);
  const Matrix x = model.input_scaler.transform(data.features);
  const TargetScaling ys = target_scaling(data.targets);
  const Vector y = ((data.targets.array() - ys.mean) / ys.scale).matrix();

  ParamRefs params = model.encoder.parameters();
  const std::size_t enc_tensors = params.size();
  head.parameters(params);
  Adam adam(to_const(params), AdamConfig{config.learning_rate});

  const auto n = static_cast<std::size_t>(data.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<Index> order(n);
  Grads grads(params.size());
  DenseNet::Cache cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += bs) {
      const std::size_t b1 = std::min(n, b0 + bs);
      const std::span<const Index> rows(order.data() + b0, b1 - b0);
      Matrix xb(static_cast<Index>(rows.size()), x.cols());
      gather_rows(x, rows, xb, 0);
      Vector yb(xb.rows());
      for (Index i = 0; i < xb.rows(); ++i) yb(i) = y(rows[static_cast<std::size_t>(i)]);

      const Matrix h = model.encoder.forward(xb, Mode::train, rng, cache);
      const Vector diff = head.forward(h).col(0) - yb;
      loss_sum += diff.squaredNorm();
      const Matrix g = (2.0 / static_cast<double>(xb.rows())) * diff;
      const Matrix dh = head.backward(h, g, std::span<Matrix>(grads).subspan(enc_tensors, Affine::kTensors));
      model.encoder.backward(cache, dh, std::span<Matrix>(grads).subspan(0, enc_tensors));
      if (adam.step(params, grads) == StepStatus::rejected_non_finite)
        throw NumericalError("vanilla: non-finite gradient at epoch " + std::to_string(epoch));
    }
    const double loss = loss_sum / static_cast<double>(n);
    check_loss(loss, "vanilla", epoch);
    out.loss_trace.push_back(loss);
  }
  Scaling identity;
  identity.mean = RowVector::Zero(head.in());
  identity.scale = RowVector::Ones(head.in());
  model.head = fold_head(head, identity, ys);
  return out;
}

LabeledFeatureSet extract_features(const RegressorModel& model, const LabeledFeatureSet& data) {
  LabeledFeatureSet out = make_feature_set(model.encode(data.features), data.targets, data.name);
  return out;
}

// ---------------------------------------------------------------- persistence

namespace {

Json affine_to_json(const Affine& a) {
  return Json{{"weight", matrix_to_json(a.weight)}, {"bias", matrix_to_json(a.bias)}};
}

Affine affine_from_json(const Json& j) {
  Affine a;
  a.weight = matrix_from_json(j.at("weight"));
  a.bias = matrix_from_json(j.at("bias"));
  if (a.bias.rows() != 1 || a.bias.cols() != a.weight.cols()) throw ParseError("regressor: bias shape mismatch");
  return a;
}

}  // namespace

Json regressor_to_json(const RegressorModel& model) {
  Json j{{"format", "latentdiff-regressor"},
         {"encoder", to_string(model.kind)},
         {"input_width", model.input_width},
         {"head", affine_to_json(model.head)}};
  if (model.kind == EncoderKind::mlp) {
    j["input_scaler"] = standardizer_to_json(model.input_scaler);
    Json layers = Json::array();
    const auto& specs = model.encoder.specs();
    for (std::size_t i = 0; i < specs.size(); ++i) {
      Json l = affine_to_json(model.encoder.affines()[i]);
      l["activation"] = specs[i].activation == Activation::relu ? "relu" : "identity";
      l["dropout"] = specs[i].dropout;
      if (specs[i].layer_norm) throw Error("regressor: layer norm in the encoder is not serializable");
      layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
  }
  return j;
}

RegressorModel regressor_from_json(const Json& j) {
  try {
    if (j.at("format") != "latentdiff-regressor") throw ParseError("regressor: unexpected format tag");
    RegressorModel model;
    model.kind = parse_encoder_kind(j.at("encoder").get<std::string>());
    model.input_width = j.at("input_width").get<Index>();
    model.head = affine_from_json(j.at("head"));
    if (model.head.out() != 1) throw ParseError("regressor: head must have one output");
    if (model.kind == EncoderKind::mlp) {
      model.input_scaler = standardizer_from_json(j.at("input_scaler"));
      std::vector<LayerSpec> specs;
      std::vector<Affine> affines;
      for (const Json& l : j.at("layers")) {
        Affine a = affine_from_json(l);
        const std::string act = l.at("activation").get<std::string>();
        specs.push_back(LayerSpec{a.in(), a.out(), act == "relu" ? Activation::relu : Activation::identity, false,
                                  l.at("dropout").get<double>()});
        affines.push_back(std::move(a));
      }
      Rng scratch(0);
      model.encoder = DenseNet(specs, scratch);
      for (std::size_t i = 0; i < affines.size(); ++i) model.encoder.affines()[i] = std::move(affines[i]);
      if (model.encoder.in_dim() != model.input_width || model.encoder.out_dim() != model.head.in())
        throw ParseError("regressor: encoder shapes do not chain with input width and head");
    } else if (model.head.in() != model.input_width) {
      throw ParseError("regressor: identity encoder needs head width == input width");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("regressor: malformed checkpoint: ") + e.what());
  }
}

void save_regressor(const std::filesystem::path& path, const RegressorModel& model) {
  write_json(path, regressor_to_json(model), -1);
}

RegressorModel load_regressor(const std::filesystem::path& path) { return regressor_from_json(read_json(path)); }

}  // namespace latentdiff
