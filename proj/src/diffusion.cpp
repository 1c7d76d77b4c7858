#include "latentdiff/diffusion.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <sstream>

#include "latentdiff/errors.hpp"

namespace latentdiff {

std::string to_string(Parameterization p) { return p == Parameterization::velocity ? "v" : "noise"; }

Parameterization parse_parameterization(std::string_view text) {
  if (text == "v" || text == "velocity") return Parameterization::velocity;
  if (text == "noise" || text == "eps") return Parameterization::noise;
  throw ConfigError("unknown parameterization '" + std::string(text) + "'");
}

Denoiser DiffusionModel::sampling_net(bool use_ema) const {
  Denoiser copy = net;
  if (use_ema) copy.load_parameters(ema.shadow());
  return copy;
}

namespace {

DenoiserConfig denoiser_config(const DiffusionTrainConfig& c, Index feature_dim) {
  DenoiserConfig d;
  d.feature_dim = feature_dim;
  d.embed_width = c.embed_width;
  d.target_hidden = c.target_hidden;
  d.hidden_width = c.hidden_width;
  d.blocks = c.blocks;
  d.dropout = c.dropout;
  return d;
}

void validate(const DiffusionTrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("diffusion: epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("diffusion: batch_size must be >= 1");
  if (!(c.balance >= 0.0 && c.balance <= 1.0)) throw ConfigError("diffusion: balance must lie in [0, 1]");
  if (!(c.learning_rate > 0.0)) throw ConfigError("diffusion: learning_rate must be positive");
  if (c.timesteps < 1) throw ConfigError("diffusion: timesteps must be >= 1");
  if (c.ema_decay < 0.0 || c.ema_decay > 1.0) throw ConfigError("diffusion: ema_decay must lie in [0, 1]");
  if (!(c.clamp > 0.0)) throw ConfigError("diffusion: clamp must be positive");
}

}  // namespace

DiffusionTrainResult train_diffusion(const Matrix& features, const Vector& targets,
                                     const BinSpec& bins, const DiffusionTrainConfig& config) {
  validate(config);
  const Index n = features.rows();
  const Index m = features.cols();
  if (n < 1 || m < 1) throw Error("train_diffusion: empty feature matrix");
  if (targets.size() != n) throw DimensionError("train_diffusion: features/targets length mismatch");
  if (!features.allFinite() || !targets.allFinite())
    throw NumericalError("train_diffusion: non-finite training data");

  DiffusionTrainResult result;
  DiffusionModel& model = result.model;
  model.config = config;
  model.y_min = bins.y_min();
  model.y_max = bins.y_max();
  model.schedule = build_schedule(config.schedule, config.timesteps, config.offset);
  if (n >= 2) {
    model.standardizer = Standardizer::fit(features);
  } else {
    model.standardizer = Standardizer(features.row(0), RowVector::Ones(m),
                                      std::vector<bool>(static_cast<std::size_t>(m), true));
  }

  Rng init_rng = Rng::substream(config.seed, "diffusion-init");
  model.net = Denoiser(denoiser_config(config, m), init_rng);
  model.ema = EmaShadow(to_const(model.net.parameters()), config.ema_decay);

  const Matrix z0_all = model.standardizer.transform(features);
  Vector y_all(n);
  for (Index i = 0; i < n; ++i) {
    if (targets(i) < bins.y_min() || targets(i) > bins.y_max())
      throw RangeError("train_diffusion: target outside the bin range");
    y_all(i) = model.normalize_target(targets(i));
  }

  Rng rng = Rng::substream(config.seed, "diffusion-train");
  Adam adam(to_const(model.net.parameters()), AdamConfig{config.learning_rate});
  const Index batch = std::min<Index>(config.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::discrete_distribution<Index> weighted;
  if (config.balance > 0.0) {
    const std::vector<std::size_t> counts = bins.counts(targets);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      w[static_cast<std::size_t>(i)] =
          std::pow(static_cast<double>(counts[static_cast<std::size_t>(bins.index(targets(i)))]), -config.balance);
    weighted = std::discrete_distribution<Index>(w.begin(), w.end());
  }

  Denoiser::Cache cache;
  double ema_steps = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.balance > 0.0)
      for (Index& o : order) o = weighted(rng.engine());
    else
      std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    Index seen = 0;
    for (Index start = 0; start < n; start += batch) {
      const Index b = std::min(batch, n - start);
      Matrix z0(b, m);
      Vector y(b);
      std::vector<int> t(static_cast<std::size_t>(b));
      for (Index r = 0; r < b; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        z0.row(r) = z0_all.row(src);
        y(r) = y_all(src);
        t[static_cast<std::size_t>(r)] = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(config.timesteps)));
      }
      const Matrix eps = rng.normal_matrix(b, m);
      const Matrix z_t = forward_sample(model.schedule, z0, t, eps);
      const Matrix target = config.parameterization == Parameterization::velocity
                                ? velocity_target(model.schedule, z0, eps, t)
                                : eps;

      const Matrix pred = model.net.forward(z_t, y, t, Mode::train, rng, cache);
      const Matrix diff = pred - target;
      const double loss = diff.squaredNorm() / static_cast<double>(b);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train_diffusion: non-finite loss at epoch " << epoch << ", batch offset " << start;
        throw NumericalError(os.str());
      }
      Grads grads = model.net.backward(cache, (2.0 / static_cast<double>(b)) * diff);
      clip_global_norm(grads, config.grad_clip);
      if (adam.step(model.net.parameters(), grads) != StepStatus::applied) {
        std::ostringstream os;
        os << "train_diffusion: non-finite gradient at epoch " << epoch << ", batch offset " << start;
        throw NumericalError(os.str());
      }
      ++ema_steps;
      const double decay = config.ema_warmup
                               ? std::min(config.ema_decay, (1.0 + ema_steps) / (10.0 + ema_steps))
                               : config.ema_decay;
      model.ema.update(to_const(model.net.parameters()), decay);
      epoch_loss += loss * static_cast<double>(b);
      seen += b;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(seen));
    spdlog::debug("diffusion epoch {} loss {:.6f}", epoch, result.loss_trace.back());
  }
  return result;
}

Matrix sample_standardized(const DiffusionModel& model, double y, Index count, Rng& rng, bool use_ema) {
  return sample_with_net(model, model.sampling_net(use_ema), y, count, rng);
}

Matrix sample_with_net(const DiffusionModel& model, const Denoiser& net, double y, Index count, Rng& rng) {
  if (count < 1) throw ConfigError("reverse_sample: count must be >= 1");
  if (!(y >= model.y_min && y <= model.y_max)) {
    std::ostringstream os;
    os << "reverse_sample: condition " << y << " outside training range [" << model.y_min << ", "
       << model.y_max << "]";
    throw RangeError(os.str());
  }
  const NoiseSchedule& s = model.schedule;
  const Index m = model.feature_dim();
  const Vector cond = Vector::Constant(count, model.normalize_target(y));
  const double clamp = model.config.clamp;

  Matrix z = rng.normal_matrix(count, m);
  std::vector<int> t_rows(static_cast<std::size_t>(count));
  for (int t = s.timesteps(); t >= 1; --t) {
    std::fill(t_rows.begin(), t_rows.end(), t);
    const Matrix pred = net.forward(z, cond, t_rows);
    Matrix z0_hat = model.config.parameterization == Parameterization::velocity
                        ? recover_z0(s, z, pred, t)
                        : recover_z0_from_noise(s, z, pred, t);
    z0_hat = z0_hat.cwiseMax(-clamp).cwiseMin(clamp);
    Matrix mean = posterior_mean(s, z0_hat, z, t);
    if (t > 1) {
      const double sd = std::sqrt(s.posterior_variance(t));
      z = mean + sd * rng.normal_matrix(count, m);
    } else {
      z = std::move(mean);
    }
    if (!z.allFinite())
      throw NumericalError("reverse_sample: non-finite state at step t=" + std::to_string(t));
  }
  return z;
}

Matrix reverse_sample(const DiffusionModel& model, double y, Index count, std::uint64_t seed, bool use_ema) {
  Rng rng(seed, fnv1a64("reverse-sample"));
  return model.standardizer.inverse_transform(sample_standardized(model, y, count, rng, use_ema));
}

// ---------------------------------------------------------------- persistence

Json diffusion_config_to_json(const DiffusionTrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"parameterization", to_string(c.parameterization)},
              {"schedule", to_string(c.schedule)},
              {"timesteps", c.timesteps},
              {"offset", c.offset},
              {"ema_decay", c.ema_decay},
              {"ema_warmup", c.ema_warmup},
              {"dropout", c.dropout},
              {"hidden_width", c.hidden_width},
              {"blocks", c.blocks},
              {"embed_width", c.embed_width},
              {"target_hidden", c.target_hidden},
              {"clamp", c.clamp},
              {"grad_clip", c.grad_clip},
              {"balance", c.balance},
              {"seed", c.seed}};
}

DiffusionTrainConfig diffusion_config_from_json(const Json& j) {
  DiffusionTrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.parameterization = parse_parameterization(j.at("parameterization").get<std::string>());
  c.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
  c.timesteps = j.at("timesteps").get<int>();
  c.offset = j.at("offset").get<double>();
  c.ema_decay = j.at("ema_decay").get<double>();
  c.ema_warmup = j.at("ema_warmup").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  c.hidden_width = j.at("hidden_width").get<Index>();
  c.blocks = j.at("blocks").get<int>();
  c.embed_width = j.at("embed_width").get<Index>();
  c.target_hidden = j.at("target_hidden").get<Index>();
  c.clamp = j.at("clamp").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.balance = j.at("balance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

Json tensors_to_json(const ConstParamRefs& params) {
  Json arr = Json::array();
  for (const Matrix* p : params) arr.push_back(matrix_to_json(*p));
  return arr;
}

Grads tensors_from_json(const Json& arr) {
  Grads out;
  for (const Json& j : arr) out.push_back(matrix_from_json(j));
  return out;
}

}  // namespace

Json diffusion_model_to_json(const DiffusionModel& model) {
  ConstParamRefs shadow;
  for (const Matrix& m : model.ema.shadow()) shadow.push_back(&m);
  Json shapes = Json::array();
  for (const Matrix* p : model.net.parameters()) shapes.push_back({p->rows(), p->cols()});
  return Json{{"format", "latentdiff-diffusion"},
              {"version", 1},
              {"feature_dim", model.feature_dim()},
              {"config", diffusion_config_to_json(model.config)},
              {"config_hash", model.config_hash},
              {"schedule",
               {{"kind", to_string(model.schedule.kind())},
                {"timesteps", model.schedule.timesteps()},
                {"offset", model.schedule.offset()}}},
              {"target_range", {model.y_min, model.y_max}},
              {"standardizer", standardizer_to_json(model.standardizer)},
              {"shapes", shapes},
              {"parameters", tensors_to_json(model.net.parameters())},
              {"ema_decay", model.ema.decay()},
              {"ema_shadow", tensors_to_json(shadow)}};
}

DiffusionModel diffusion_model_from_json(const Json& j) {
  if (j.value("format", "") != "latentdiff-diffusion")
    throw ParseError("not a diffusion checkpoint (format tag missing)");
  DiffusionModel model;
  model.config = diffusion_config_from_json(j.at("config"));
  model.config_hash = j.at("config_hash").get<std::string>();
  const Json& s = j.at("schedule");
  model.schedule = build_schedule(parse_schedule_kind(s.at("kind").get<std::string>()),
                                  s.at("timesteps").get<int>(), s.at("offset").get<double>());
  model.y_min = j.at("target_range").at(0).get<double>();
  model.y_max = j.at("target_range").at(1).get<double>();
  model.standardizer = standardizer_from_json(j.at("standardizer"));
  Rng unused(0);
  model.net = Denoiser(denoiser_config(model.config, j.at("feature_dim").get<Index>()), unused);
  model.net.load_parameters(tensors_from_json(j.at("parameters")));
  model.ema = EmaShadow(to_const(model.net.parameters()), j.at("ema_decay").get<double>());
  Grads shadow = tensors_from_json(j.at("ema_shadow"));
  if (shadow.size() != model.ema.shadow().size()) throw ParseError("EMA shadow tensor count mismatch");
  for (std::size_t i = 0; i < shadow.size(); ++i) {
    if (shadow[i].rows() != model.ema.shadow()[i].rows() || shadow[i].cols() != model.ema.shadow()[i].cols())
      throw ParseError("EMA shadow shape mismatch at tensor " + std::to_string(i));
    model.ema.shadow()[i] = std::move(shadow[i]);
  }
  return model;
}

void save_diffusion_model(const std::filesystem::path& path, const DiffusionModel& model) {
  write_json(path, diffusion_model_to_json(model), -1);
}

DiffusionModel load_diffusion_model(const std::filesystem::path& path) {
  return diffusion_model_from_json(read_json(path));
}

}  // namespace latentdiff
