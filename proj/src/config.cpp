#include "latentdiff/config.hpp"

#include <set>

#include "latentdiff/dataset.hpp"
#include "latentdiff/errors.hpp"

namespace latentdiff {

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported in strict mode.
class Section {
 public:
  Section(const Json* j, std::string path, bool strict) : j_(j), path_(std::move(path)), strict_(strict) {
    if (j_ != nullptr && !j_->is_object()) throw ConfigError(where() + ": expected a JSON object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    const Json* v = find(key);
    if (v == nullptr) return;
    try {
      out = v->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(key_path(key) + ": wrong type (" + std::string(v->type_name()) + ")");
    }
  }

  void read(const std::string& key, std::optional<double>& out) {
    const Json* v = find(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    double d = 0.0;
    read(key, d);
    out = d;
  }

  template <class Parse>
  void read_enum(const std::string& key, Parse parse) {
    const Json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) throw ConfigError(key_path(key) + ": expected a string");
    try {
      parse(v->get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    const Json* v = find(key);
    return Section(v, key_path(key), strict_);
  }

  void finish() const {
    if (!strict_ || j_ == nullptr) return;
    for (const auto& [key, value] : j_->items())
      if (!seen_.count(key)) throw ConfigError(key_path(key) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    if (j_ == nullptr) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  const Json* j_;
  std::string path_;
  bool strict_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw RangeError(key + ": " + what);
}

std::string num(double v) { return format_double(v); }

}  // namespace

PipelineConfig config_from_json(const Json& j, const ParseOptions& options) {
  PipelineConfig c;
  Section root(&j, "", options.strict);
  root.read("seed", c.seed);
  root.read("out_dir", c.out_dir);

  Section data = root.child("data");
  data.read("train_csv", c.data.train_csv);
  data.read("test_csv", c.data.test_csv);
  data.read("test_fraction", c.data.test_fraction);
  data.read("n", c.data.n);
  data.read("m", c.data.m);
  data.read("decay", c.data.decay);
  data.read("noise", c.data.noise);
  data.read("test_n", c.data.test_n);
  data.read("bins", c.data.bins);
  data.read("y_min", c.data.y_min);
  data.read("y_max", c.data.y_max);
  data.finish();

  Section reg = root.child("regressor");
  reg.read_enum("encoder", [&](const std::string& s) { c.regressor.encoder = parse_encoder_kind(s); });
  reg.read("hidden", c.regressor.hidden);
  reg.read("epochs", c.regressor.epochs);
  reg.read("batch_size", c.regressor.batch_size);
  reg.read("learning_rate", c.regressor.learning_rate);
  reg.read("dropout", c.regressor.dropout);
  reg.finish();

  Section diff = root.child("diffusion");
  DiffusionTrainConfig& d = c.diffusion;
  diff.read("epochs", d.epochs);
  diff.read("batch_size", d.batch_size);
  diff.read("learning_rate", d.learning_rate);
  diff.read_enum("parameterization", [&](const std::string& s) { d.parameterization = parse_parameterization(s); });
  diff.read_enum("schedule", [&](const std::string& s) { d.schedule = parse_schedule_kind(s); });
  diff.read("timesteps", d.timesteps);
  diff.read("offset", d.offset);
  diff.read("ema_decay", d.ema_decay);
  diff.read("ema_warmup", d.ema_warmup);
  diff.read("dropout", d.dropout);
  diff.read("hidden_width", d.hidden_width);
  diff.read("blocks", d.blocks);
  diff.read("embed_width", d.embed_width);
  diff.read("target_hidden", d.target_hidden);
  diff.read("clamp", d.clamp);
  diff.read("grad_clip", d.grad_clip);
  diff.read("balance", d.balance);
  diff.read("sample_with_ema", c.sample_with_ema);
  diff.finish();

  Section pri = root.child("priority");
  pri.read("lambda", c.priority.lambda);
  pri.read("normalize_errors", c.priority.normalize_errors);
  pri.read_enum("mode", [&](const std::string& s) { c.priority.mode = parse_allocation_mode(s); });
  pri.finish();

  Section gate = root.child("gate");
  gate.read("enabled", c.gate.enabled);
  gate.read("percentile", c.gate.options.percentile);
  gate.read("min_samples", c.gate.options.min_samples);
  gate.read("shrinkage", c.gate.options.shrinkage);
  gate.read("diagonal_fallback", c.gate.options.diagonal_fallback);
  gate.read("max_attempts_factor", c.gate.max_attempts_factor);
  gate.read("skip_ungated", c.gate.skip_ungated);
  gate.finish();

  Section mix = root.child("mix");
  mix.read("ratio", c.mix.ratio);
  mix.read("per_epoch", c.mix.per_epoch);
  mix.read("epochs", c.mix.epochs);
  mix.read("batch_size", c.mix.batch_size);
  mix.read("learning_rate", c.mix.learning_rate);
  mix.read("warm_start", c.mix.warm_start);
  mix.finish();

  Section an = root.child("analytics");
  an.read("enabled", c.analytics.enabled);
  an.read("max_pairs", c.analytics.max_pairs);
  an.read("histogram_bins", c.analytics.histogram_bins);
  an.read("smoothing", c.analytics.smoothing);
  an.read("pca_components", c.analytics.pca_components);
  an.finish();

  root.finish();
  validate_config(c);
  return c;
}

PipelineConfig parse_config(const std::filesystem::path& path, const ParseOptions& options) {
  return config_from_json(read_json(path), options);
}

Json config_to_json(const PipelineConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  const DiffusionTrainConfig& d = c.diffusion;
  return Json{
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"data",
       {{"train_csv", c.data.train_csv},
        {"test_csv", c.data.test_csv},
        {"test_fraction", c.data.test_fraction},
        {"n", c.data.n},
        {"m", c.data.m},
        {"decay", c.data.decay},
        {"noise", c.data.noise},
        {"test_n", c.data.test_n},
        {"bins", c.data.bins},
        {"y_min", opt(c.data.y_min)},
        {"y_max", opt(c.data.y_max)}}},
      {"regressor",
       {{"encoder", to_string(c.regressor.encoder)},
        {"hidden", c.regressor.hidden},
        {"epochs", c.regressor.epochs},
        {"batch_size", c.regressor.batch_size},
        {"learning_rate", c.regressor.learning_rate},
        {"dropout", c.regressor.dropout}}},
      {"diffusion",
       {{"epochs", d.epochs},
        {"batch_size", d.batch_size},
        {"learning_rate", d.learning_rate},
        {"parameterization", to_string(d.parameterization)},
        {"schedule", to_string(d.schedule)},
        {"timesteps", d.timesteps},
        {"offset", d.offset},
        {"ema_decay", d.ema_decay},
        {"ema_warmup", d.ema_warmup},
        {"dropout", d.dropout},
        {"hidden_width", d.hidden_width},
        {"blocks", d.blocks},
        {"embed_width", d.embed_width},
        {"target_hidden", d.target_hidden},
        {"clamp", d.clamp},
        {"grad_clip", d.grad_clip},
        {"balance", d.balance},
        {"sample_with_ema", c.sample_with_ema}}},
      {"priority",
       {{"lambda", c.priority.lambda},
        {"normalize_errors", c.priority.normalize_errors},
        {"mode", to_string(c.priority.mode)}}},
      {"gate",
       {{"enabled", c.gate.enabled},
        {"percentile", c.gate.options.percentile},
        {"min_samples", c.gate.options.min_samples},
        {"shrinkage", c.gate.options.shrinkage},
        {"diagonal_fallback", c.gate.options.diagonal_fallback},
        {"max_attempts_factor", c.gate.max_attempts_factor},
        {"skip_ungated", c.gate.skip_ungated}}},
      {"mix",
       {{"ratio", c.mix.ratio},
        {"per_epoch", c.mix.per_epoch},
        {"epochs", c.mix.epochs},
        {"batch_size", c.mix.batch_size},
        {"learning_rate", c.mix.learning_rate},
        {"warm_start", c.mix.warm_start}}},
      {"analytics",
       {{"enabled", c.analytics.enabled},
        {"max_pairs", c.analytics.max_pairs},
        {"histogram_bins", c.analytics.histogram_bins},
        {"smoothing", c.analytics.smoothing},
        {"pca_components", c.analytics.pca_components}}}};
}

void validate_config(const PipelineConfig& c) {
  const DataConfig& data = c.data;
  require(data.test_fraction > 0.0 && data.test_fraction < 1.0, "data.test_fraction",
          "must lie in (0, 1), got " + num(data.test_fraction));
  require(data.n >= 2, "data.n", "must be >= 2");
  require(data.m >= 1, "data.m", "must be >= 1");
  require(data.decay > 0.0, "data.decay", "must be positive, got " + num(data.decay));
  require(data.noise >= 0.0, "data.noise", "must be non-negative");
  require(data.test_n >= 1, "data.test_n", "must be >= 1");
  require(data.bins >= 2, "data.bins", "must be >= 2, got " + std::to_string(data.bins));
  if (data.train_csv.empty()) {
    require(data.y_min.has_value(), "data.y_min", "required for the synthetic benchmark");
    require(data.y_max.has_value(), "data.y_max", "required for the synthetic benchmark");
    require(data.n >= data.bins, "data.n", "must be >= data.bins for the synthetic benchmark");
    require(data.test_n >= data.bins, "data.test_n", "must be >= data.bins for the synthetic benchmark");
  }
  if (data.y_min && data.y_max)
    require(*data.y_max > *data.y_min, "data.y_max", "must exceed data.y_min");

  const RegressorConfig& r = c.regressor;
  require(r.epochs >= 1, "regressor.epochs", "must be >= 1");
  require(r.batch_size >= 1, "regressor.batch_size", "must be >= 1");
  require(r.learning_rate > 0.0, "regressor.learning_rate", "must be positive");
  require(r.dropout >= 0.0 && r.dropout < 1.0, "regressor.dropout", "must lie in [0, 1)");
  if (r.encoder == EncoderKind::mlp) {
    require(!r.hidden.empty(), "regressor.hidden", "needs at least one width");
    for (Index w : r.hidden) require(w >= 1, "regressor.hidden", "widths must be >= 1");
  }

  const DiffusionTrainConfig& d = c.diffusion;
  require(d.epochs >= 1, "diffusion.epochs", "must be >= 1");
  require(d.batch_size >= 1, "diffusion.batch_size", "must be >= 1");
  require(d.learning_rate > 0.0, "diffusion.learning_rate", "must be positive");
  require(d.timesteps >= 1, "diffusion.timesteps", "must be >= 1");
  require(d.offset >= 0.0, "diffusion.offset", "must be non-negative");
  require(d.ema_decay >= 0.0 && d.ema_decay <= 1.0, "diffusion.ema_decay",
          "must lie in [0, 1], got " + num(d.ema_decay));
  require(d.dropout >= 0.0 && d.dropout < 1.0, "diffusion.dropout", "must lie in [0, 1)");
  require(d.hidden_width >= 1, "diffusion.hidden_width", "must be >= 1");
  require(d.blocks >= 0, "diffusion.blocks", "must be >= 0");
  require(d.embed_width >= 2 && d.embed_width % 2 == 0, "diffusion.embed_width", "must be even and >= 2");
  require(d.target_hidden >= 1, "diffusion.target_hidden", "must be >= 1");
  require(d.clamp > 0.0, "diffusion.clamp", "must be positive");

  require(c.priority.lambda >= 0.0 && c.priority.lambda <= 1.0, "priority.lambda",
          "must lie in [0, 1], got " + num(c.priority.lambda));

  const GateOptions& g = c.gate.options;
  require(g.percentile > 0.0 && g.percentile <= 1.0, "gate.percentile", "must lie in (0, 1], got " + num(g.percentile));
  require(g.shrinkage >= 0.0 && g.shrinkage <= 1.0, "gate.shrinkage", "must lie in [0, 1], got " + num(g.shrinkage));
  require(c.gate.max_attempts_factor >= 1.0, "gate.max_attempts_factor", "must be >= 1");

  require(c.mix.ratio >= 0.0 && c.mix.ratio < 1.0, "mix.ratio", "must lie in [0, 1), got " + num(c.mix.ratio));
  for (double v : c.mix.per_epoch) require(v >= 0.0 && v < 1.0, "mix.per_epoch", "entries must lie in [0, 1)");
  require(c.mix.epochs >= 1, "mix.epochs", "must be >= 1");
  require(c.mix.batch_size >= 1, "mix.batch_size", "must be >= 1");
  require(c.mix.learning_rate > 0.0, "mix.learning_rate", "must be positive");
  require(static_cast<double>(synthetic_rows_per_batch(c.mix.batch_size, c.mix.ratio)) < c.mix.batch_size,
          "mix.ratio", "leaves no real rows in a batch of mix.batch_size");

  require(c.analytics.max_pairs >= 1, "analytics.max_pairs", "must be >= 1");
  require(c.analytics.histogram_bins >= 2, "analytics.histogram_bins", "must be >= 2");
  require(c.analytics.smoothing > 0.0, "analytics.smoothing", "must be positive");
  require(c.analytics.pca_components >= 1, "analytics.pca_components", "must be >= 1");
}

Json config_snapshot(const PipelineConfig& config) {
  Json j = config_to_json(config);
  j.erase("out_dir");
  return j;
}

std::string config_hash(const PipelineConfig& config) { return json_hash(config_snapshot(config)); }

}  // namespace latentdiff
