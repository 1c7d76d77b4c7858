#include "latentdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "latentdiff/dataset.hpp"
#include "latentdiff/errors.hpp"

namespace latentdiff {

std::string to_string(Region region) {
  switch (region) {
    case Region::all: return "all";
    case Region::many: return "many";
    case Region::median: return "median";
    case Region::few: return "few";
  }
  return "?";
}

namespace {

constexpr const char* kMetricNames[] = {"mae", "gm", "mse", "pearson", "r2"};

double metric_value(const RegionMetrics& m, std::string_view name) {
  if (name == "mae") return m.mae;
  if (name == "gm") return m.gm;
  if (name == "mse") return m.mse;
  if (name == "pearson") return m.pearson;
  return m.r2;
}

bool lower_is_better(std::string_view name) { return name == "mae" || name == "gm" || name == "mse"; }

}  // namespace

double geometric_mean_error(std::span<const double> errors, double floor) {
  if (errors.empty()) throw Error("geometric_mean_error: empty input");
  double sum = 0.0;
  for (double e : errors) sum += std::log(std::max(std::abs(e), floor));
  return std::exp(sum / static_cast<double>(errors.size()));
}

RegionMetrics region_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw DimensionError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  if (predictions.empty()) throw Error("metrics: empty input");
  const std::size_t n = predictions.size();
  const double dn = static_cast<double>(n);

  RegionMetrics m;
  m.count = n;
  std::vector<double> err(n);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double mean_p = 0.0;
  double mean_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    err[i] = predictions[i] - targets[i];
    abs_sum += std::abs(err[i]);
    sq_sum += err[i] * err[i];
    mean_p += predictions[i];
    mean_t += targets[i];
  }
  mean_p /= dn;
  mean_t /= dn;
  m.mae = abs_sum / dn;
  m.mse = sq_sum / dn;
  m.gm = geometric_mean_error(err);

  double spp = 0.0;
  double stt = 0.0;
  double spt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = predictions[i] - mean_p;
    const double dt = targets[i] - mean_t;
    spp += dp * dp;
    stt += dt * dt;
    spt += dp * dt;
  }
  if (spp > 0.0 && stt > 0.0) {
    m.pearson = std::clamp(spt / std::sqrt(spp * stt), -1.0, 1.0);
  } else {
    m.pearson = 0.0;
    m.pearson_degenerate = true;
  }
  if (stt > 0.0) {
    m.r2 = 1.0 - sq_sum / stt;
  } else {
    m.r2 = 0.0;
    m.r2_degenerate = true;
  }
  return m;
}

MetricsReport compute_metrics(const Vector& predictions, const Vector& targets, const ShotPartition& partition,
                              const BinSpec& bins) {
  if (predictions.size() != targets.size())
    throw DimensionError("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  if (targets.size() == 0) throw Error("compute_metrics: empty input");
  if (partition.labels.size() != static_cast<std::size_t>(bins.bins()))
    throw DimensionError("compute_metrics: shot partition and binspec disagree on the bin count");

  std::array<std::vector<double>, 4> p;
  std::array<std::vector<double>, 4> t;
  for (Index i = 0; i < targets.size(); ++i) {
    const Shot shot = partition.label(bins.index(targets(i)));
    const Region region = shot == Shot::many ? Region::many : shot == Shot::median ? Region::median : Region::few;
    for (Region r : {Region::all, region}) {
      p[static_cast<std::size_t>(r)].push_back(predictions(i));
      t[static_cast<std::size_t>(r)].push_back(targets(i));
    }
  }
  MetricsReport report;
  for (Region r : kRegions) {
    const auto k = static_cast<std::size_t>(r);
    if (!p[k].empty()) report.regions[k] = region_metrics(p[k], t[k]);
  }
  return report;
}

Json MetricsReport::to_json() const {
  Json metrics = Json::object();
  for (Region r : kRegions) {
    const std::string suffix = "." + to_string(r);
    const auto& m = region(r);
    metrics["count" + suffix] = m ? m->count : 0;
    for (const char* name : kMetricNames)
      metrics[std::string(name) + suffix] = m ? Json(metric_value(*m, name)) : Json(nullptr);
    metrics["pearson_degenerate" + suffix] = m ? Json(m->pearson_degenerate) : Json(nullptr);
    metrics["r2_degenerate" + suffix] = m ? Json(m->r2_degenerate) : Json(nullptr);
  }
  return Json{{"label", label}, {"config_hash", config_hash}, {"seed", seed}, {"metrics", metrics}};
}

MetricsReport MetricsReport::from_json(const Json& j) {
  try {
    MetricsReport report;
    report.label = j.at("label").get<std::string>();
    report.config_hash = j.at("config_hash").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    const Json& metrics = j.at("metrics");
    for (Region r : kRegions) {
      const std::string suffix = "." + to_string(r);
      if (metrics.at("mae" + suffix).is_null()) continue;
      RegionMetrics m;
      m.count = metrics.at("count" + suffix).get<std::size_t>();
      m.mae = metrics.at("mae" + suffix).get<double>();
      m.gm = metrics.at("gm" + suffix).get<double>();
      m.mse = metrics.at("mse" + suffix).get<double>();
      m.pearson = metrics.at("pearson" + suffix).get<double>();
      m.r2 = metrics.at("r2" + suffix).get<double>();
      m.pearson_degenerate = metrics.at("pearson_degenerate" + suffix).get<bool>();
      m.r2_degenerate = metrics.at("r2_degenerate" + suffix).get<bool>();
      report.regions[static_cast<std::size_t>(r)] = m;
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "region,count,mae,gm,mse,pearson,r2\n";
  for (Region r : kRegions) {
    const auto& m = region(r);
    os << to_string(r) << ',';
    if (m) {
      os << m->count << ',' << format_double(m->mae) << ',' << format_double(m->gm) << ','
         << format_double(m->mse) << ',' << format_double(m->pearson) << ',' << format_double(m->r2) << '\n';
    } else {
      os << "0,,,,,\n";
    }
  }
  return os.str();
}

DeltaReport compare_reports(const MetricsReport& baseline, const MetricsReport& candidate) {
  DeltaReport out;
  for (Region r : kRegions) {
    const auto& a = baseline.region(r);
    const auto& b = candidate.region(r);
    if (a && b && a->count != b->count)
      throw ConfigError("compare_reports: region '" + to_string(r) + "' has " + std::to_string(a->count) + " vs " +
                        std::to_string(b->count) + " samples; reports come from different partitions");
    for (const char* name : kMetricNames) {
      MetricDelta d;
      if (a) d.baseline = metric_value(*a, name);
      if (b) d.candidate = metric_value(*b, name);
      if (!a || !b) {
        d.reason = std::string("region '") + to_string(r) + "' absent in " +
                   (!a && !b ? "both reports" : !a ? "baseline" : "candidate");
      } else {
        d.delta = *d.candidate - *d.baseline;
        if (*d.baseline == 0.0) {
          d.reason = "baseline value is zero";
        } else {
          const double gain = lower_is_better(name) ? -*d.delta : *d.delta;
          d.relative_percent = 100.0 * gain / std::abs(*d.baseline);
        }
      }
      out.entries[std::string(name) + "." + to_string(r)] = d;
    }
  }
  return out;
}

Json DeltaReport::to_json() const {
  Json j = Json::object();
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  for (const auto& [key, d] : entries) {
    Json e{{"baseline", opt(d.baseline)},
           {"candidate", opt(d.candidate)},
           {"delta", opt(d.delta)},
           {"relative_percent", opt(d.relative_percent)}};
    if (!d.reason.empty()) e["reason"] = d.reason;
    j[key] = std::move(e);
  }
  return j;
}

}  // namespace latentdiff
