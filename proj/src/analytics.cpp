#include "latentdiff/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "latentdiff/errors.hpp"
#include "latentdiff/rng.hpp"

namespace latentdiff {

namespace {

struct UnitRows {
  Matrix rows;                 // normalized rows
  std::vector<Index> source;   // original row index
  std::size_t excluded = 0;
};

UnitRows unit_rows(const Matrix& x) {
  UnitRows out;
  std::vector<Index> keep;
  for (Index i = 0; i < x.rows(); ++i) {
    if (x.row(i).norm() > 0.0)
      keep.push_back(i);
    else
      ++out.excluded;
  }
  out.rows.resize(static_cast<Index>(keep.size()), x.cols());
  for (std::size_t r = 0; r < keep.size(); ++r)
    out.rows.row(static_cast<Index>(r)) = x.row(keep[r]) / x.row(keep[r]).norm();
  out.source = std::move(keep);
  return out;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RowVector column_std(const Matrix& x, const RowVector& mean) {
  return ((x.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
}

}  // namespace

CosineStats cosine_stats(const Matrix& a, const Matrix& b, std::size_t max_pairs, std::uint64_t seed,
                         bool exclude_self) {
  if (a.cols() != b.cols()) throw DimensionError("cosine_stats: feature widths differ");
  if (max_pairs == 0) throw ConfigError("cosine_stats: max_pairs must be positive");
  const UnitRows ua = unit_rows(a);
  const UnitRows ub = unit_rows(b);
  CosineStats s;
  s.excluded_a = ua.excluded;
  s.excluded_b = ub.excluded;
  const auto na = static_cast<std::size_t>(ua.rows.rows());
  const auto nb = static_cast<std::size_t>(ub.rows.rows());

  double sum = 0.0;
  double sq = 0.0;
  auto add = [&](std::size_t i, std::size_t j) {
    const double c = std::clamp(ua.rows.row(static_cast<Index>(i)).dot(ub.rows.row(static_cast<Index>(j))), -1.0, 1.0);
    sum += c;
    sq += c * c;
    ++s.pairs;
  };
  const std::size_t total = na * nb;
  if (total <= max_pairs) {
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j)
        if (!exclude_self || ua.source[i] != ub.source[j]) add(i, j);
  } else {
    s.sampled = true;
    Rng rng(seed, fnv1a64("cosine-pairs"));
    std::size_t attempts = 0;
    while (s.pairs < max_pairs && attempts < 4 * max_pairs) {
      ++attempts;
      const std::size_t i = rng.index(na);
      const std::size_t j = rng.index(nb);
      if (exclude_self && ua.source[i] == ub.source[j]) continue;
      add(i, j);
    }
  }
  if (s.pairs == 0) throw Error("cosine_stats: no valid pairs (empty sets or all rows zero)");
  const double n = static_cast<double>(s.pairs);
  s.mean = sum / n;
  s.stddev = std::sqrt(std::max(0.0, sq / n - s.mean * s.mean));
  return s;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.median = quantile_sorted(values, 0.5);
  s.p10 = quantile_sorted(values, 0.1);
  s.p90 = quantile_sorted(values, 0.9);
  s.min = values.front();
  s.max = values.back();
  return s;
}

NnAnalysis nn_analysis(const LabeledFeatureSet& synthetic, const LabeledFeatureSet& real) {
  if (real.size() == 0) throw Error("nn_analysis: empty real set");
  if (synthetic.size() > 0 && synthetic.dim() != real.dim()) throw DimensionError("nn_analysis: feature widths differ");
  const UnitRows ur = unit_rows(real.features);
  if (ur.rows.rows() == 0) throw Error("nn_analysis: every real row has zero norm");
  const UnitRows us = unit_rows(synthetic.features);

  NnAnalysis out;
  out.excluded_real = ur.excluded;
  out.excluded_synthetic = us.excluded;
  const auto n = static_cast<std::size_t>(synthetic.size());
  out.neighbor.assign(n, -1);
  out.distance.assign(n, 1.0);
  out.label_gap.assign(n, 0.0);
  if (us.rows.rows() > 0) {
    const Matrix sim = us.rows * ur.rows.transpose();
    for (Index s = 0; s < sim.rows(); ++s) {
      Index best = 0;
      sim.row(s).maxCoeff(&best);
      const auto row = static_cast<std::size_t>(us.source[static_cast<std::size_t>(s)]);
      const Index real_row = ur.source[static_cast<std::size_t>(best)];
      out.neighbor[row] = real_row;
      out.distance[row] = std::max(0.0, 1.0 - std::min(1.0, sim(s, best)));
      out.label_gap[row] = std::abs(synthetic.targets(static_cast<Index>(row)) - real.targets(real_row));
    }
  }
  std::vector<double> d;
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i)
    if (out.neighbor[i] >= 0) {
      d.push_back(out.distance[i]);
      g.push_back(out.label_gap[i]);
    }
  out.distance_summary = summarize(std::move(d));
  out.label_gap_summary = summarize(std::move(g));
  return out;
}

std::vector<double> smoothed_histogram(std::span<const double> values, double lo, double hi, int bins, double eps) {
  if (bins < 1) throw ConfigError("histogram: bins must be >= 1");
  if (values.empty()) throw Error("histogram: no values");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int k = width > 0.0 ? static_cast<int>(std::floor((v - lo) / width)) : 0;
    k = std::clamp(k, 0, bins - 1);
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  const double n = static_cast<double>(values.size());
  const double norm = 1.0 + bins * eps;
  for (double& c : counts) c = (c / n + eps) / norm;
  return counts;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw NumericalError("kl_divergence: q has zero mass where p does not");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, kl);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("js_divergence: length mismatch");
  std::vector<double> mid(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) mid[i] = 0.5 * (p[i] + q[i]);
  return std::min(std::log(2.0), 0.5 * kl_divergence(p, mid) + 0.5 * kl_divergence(q, mid));
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  // Walk the merged breakpoints i/na and j/nb of the two quantile functions.
  std::size_t i = 0;
  std::size_t j = 0;
  double u = 0.0;
  double w = 0.0;
  while (i < na && j < nb) {
    const std::size_t lhs = (i + 1) * nb;
    const std::size_t rhs = (j + 1) * na;
    const double next = lhs <= rhs ? static_cast<double>(i + 1) / na : static_cast<double>(j + 1) / nb;
    w += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return w;
}

std::vector<BinDivergence> bin_divergences(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic,
                                           const BinSpec& bins, int histogram_bins, double smoothing) {
  if (synthetic.size() > 0 && synthetic.dim() != real.dim()) throw DimensionError("bin_divergences: widths differ");
  const int k_bins = bins.bins();
  std::vector<std::vector<Index>> real_rows(static_cast<std::size_t>(k_bins));
  std::vector<std::vector<Index>> syn_rows(static_cast<std::size_t>(k_bins));
  for (Index i = 0; i < real.size(); ++i) real_rows[static_cast<std::size_t>(bins.index(real.targets(i)))].push_back(i);
  for (Index i = 0; i < synthetic.size(); ++i)
    syn_rows[static_cast<std::size_t>(bins.index(synthetic.targets(i)))].push_back(i);

  std::vector<BinDivergence> out;
  for (int k = 0; k < k_bins; ++k) {
    BinDivergence d;
    d.bin = k;
    const auto& rr = real_rows[static_cast<std::size_t>(k)];
    const auto& sr = syn_rows[static_cast<std::size_t>(k)];
    d.real_count = rr.size();
    d.synthetic_count = sr.size();
    if (rr.size() < 2) {
      d.reason = "fewer than 2 real samples";
    } else if (sr.empty()) {
      d.reason = "no synthetic samples";
    } else {
      const Matrix xr = real.features(rr, Eigen::all);
      const Matrix xs = synthetic.features(sr, Eigen::all);
      const PcaResult pca = pca_variance(xr, 1, static_cast<std::uint64_t>(k));
      const Vector pr = pca_project(pca, xr, 1).col(0);
      const Vector ps = pca_project(pca, xs, 1).col(0);
      const double lo = std::min(pr.minCoeff(), ps.minCoeff());
      const double hi = std::max(pr.maxCoeff(), ps.maxCoeff());
      const std::vector<double> vr(pr.data(), pr.data() + pr.size());
      const std::vector<double> vs(ps.data(), ps.data() + ps.size());
      const std::vector<double> hr = smoothed_histogram(vr, lo, hi, histogram_bins, smoothing);
      const std::vector<double> hs = smoothed_histogram(vs, lo, hi, histogram_bins, smoothing);
      d.kl = kl_divergence(hr, hs);
      d.js = js_divergence(hr, hs);
      d.w1 = wasserstein1(vr, vs);
      d.computed = true;
    }
    out.push_back(std::move(d));
  }
  return out;
}

PcaResult pca_variance(const Matrix& x, int k, std::uint64_t seed) {
  const Index m = x.cols();
  if (x.rows() < 2) throw Error("pca_variance: need at least 2 rows");
  if (k < 1 || k > m)
    throw ConfigError("pca_variance: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(m) + "]");

  PcaResult out;
  out.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - out.mean;
  Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  const double trace = cov.trace();
  out.components = Matrix::Zero(m, k);

  Rng rng(seed, fnv1a64("pca"));
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  for (int c = 0; c < k; ++c) {
    auto orthogonalize = [&](Vector& v) {
      for (int p = 0; p < c; ++p) v -= out.components.col(p).dot(v) * out.components.col(p);
    };
    Vector v = rng.normal_matrix(m, 1).col(0);
    orthogonalize(v);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
      Vector w = cov * v;
      orthogonalize(w);
      const double norm = w.norm();
      if (norm <= 1e-14 * scale) break;  // remaining spectrum is (numerically) zero
      w /= norm;
      const double change = (w - v).norm();
      v = std::move(w);
      if (change < 1e-13) break;
    }
    lambda = std::max(0.0, v.dot(cov * v));
    out.components.col(c) = v;
    out.eigenvalues.push_back(lambda);
    cov -= lambda * v * v.transpose();
  }
  // Deflation can leave near-equal pairs slightly out of order.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return out.eigenvalues[static_cast<std::size_t>(a)] > out.eigenvalues[static_cast<std::size_t>(b)];
  });
  Matrix sorted(m, k);
  std::vector<double> values;
  for (int c = 0; c < k; ++c) {
    sorted.col(c) = out.components.col(order[static_cast<std::size_t>(c)]);
    values.push_back(out.eigenvalues[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])]);
  }
  out.components = std::move(sorted);
  out.eigenvalues = std::move(values);
  for (double l : out.eigenvalues) out.explained_ratio.push_back(trace > 0.0 ? l / trace : 0.0);
  return out;
}

Matrix pca_project(const PcaResult& pca, const Matrix& x, int dims) {
  if (x.cols() != pca.mean.size()) throw DimensionError("pca_project: feature width mismatch");
  Matrix out = Matrix::Zero(x.rows(), dims);
  const int have = std::min<int>(dims, static_cast<int>(pca.components.cols()));
  if (have > 0) out.leftCols(have) = (x.rowwise() - pca.mean) * pca.components.leftCols(have);
  return out;
}

QualityReport quality_report(const LabeledFeatureSet& real, const LabeledFeatureSet& synthetic, const BinSpec& bins,
                             const AnalyticsOptions& options) {
  QualityReport q;
  const int k = std::min<int>(options.pca_components, static_cast<int>(real.dim()));
  q.real_real = cosine_stats(real.features, real.features, options.max_pairs, options.seed, true);
  q.pca_real = pca_variance(real.features, k, options.seed);
  q.real_dim_mean = real.features.colwise().mean();
  q.real_dim_std = column_std(real.features, q.real_dim_mean);
  if (synthetic.size() > 0) {
    if (synthetic.size() >= 2)
      q.synthetic_synthetic = cosine_stats(synthetic.features, synthetic.features, options.max_pairs, options.seed, true);
    q.real_synthetic = cosine_stats(real.features, synthetic.features, options.max_pairs, options.seed);
    q.nn = nn_analysis(synthetic, real);
    if (synthetic.size() >= 2) q.pca_synthetic = pca_variance(synthetic.features, k, options.seed);
    q.synthetic_dim_mean = synthetic.features.colwise().mean();
    q.synthetic_dim_std = column_std(synthetic.features, q.synthetic_dim_mean);
  }
  q.divergences = bin_divergences(real, synthetic, bins, options.histogram_bins, options.smoothing);
  return q;
}

namespace {

Json cosine_json(const CosineStats& s) {
  return Json{{"mean", s.mean},       {"std", s.stddev},          {"pairs", s.pairs},
              {"sampled", s.sampled}, {"excluded_a", s.excluded_a}, {"excluded_b", s.excluded_b}};
}

Json summary_json(const Summary& s) {
  return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p10", s.p10},
              {"p90", s.p90},     {"min", s.min},   {"max", s.max}};
}

Json row_json(const RowVector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

Json QualityReport::to_json() const {
  Json j;
  j["cosine"] = {{"real_real", cosine_json(real_real)},
                 {"synthetic_synthetic", synthetic_synthetic ? cosine_json(*synthetic_synthetic) : Json(nullptr)},
                 {"real_synthetic", real_synthetic ? cosine_json(*real_synthetic) : Json(nullptr)}};
  j["nearest_neighbor"] = nn ? Json{{"distance", summary_json(nn->distance_summary)},
                                    {"label_gap", summary_json(nn->label_gap_summary)},
                                    {"excluded_real", nn->excluded_real},
                                    {"excluded_synthetic", nn->excluded_synthetic}}
                             : Json(nullptr);
  Json div = Json::array();
  for (const BinDivergence& d : divergences) {
    Json e{{"bin", d.bin}, {"real_count", d.real_count}, {"synthetic_count", d.synthetic_count}};
    if (d.computed) {
      e["kl"] = d.kl;
      e["js"] = d.js;
      e["w1"] = d.w1;
    } else {
      e["skipped"] = d.reason;
    }
    div.push_back(std::move(e));
  }
  j["bin_divergences"] = std::move(div);
  j["pca"] = {{"real", pca_real.explained_ratio},
              {"synthetic", pca_synthetic ? Json(pca_synthetic->explained_ratio) : Json(nullptr)}};
  j["dimensions"] = {{"real_mean", row_json(real_dim_mean)},
                     {"real_std", row_json(real_dim_std)},
                     {"synthetic_mean", synthetic_dim_mean.size() ? row_json(synthetic_dim_mean) : Json(nullptr)},
                     {"synthetic_std", synthetic_dim_std.size() ? row_json(synthetic_dim_std) : Json(nullptr)}};
  return j;
}

void write_projection_csv(const std::filesystem::path& path, const PcaResult& pca, const LabeledFeatureSet& real,
                          const LabeledFeatureSet& synthetic) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "pc1,pc2,origin,label\n";
  auto emit = [&](const LabeledFeatureSet& set, const char* origin) {
    if (set.size() == 0) return;
    const Matrix p = pca_project(pca, set.features, 2);
    for (Index i = 0; i < p.rows(); ++i)
      out << format_double(p(i, 0)) << ',' << format_double(p(i, 1)) << ',' << origin << ','
          << format_double(set.targets(i)) << '\n';
  };
  emit(real, "real");
  emit(synthetic, "synthetic");
  if (!out) throw Error("failed while writing " + path.string());
}

}  // namespace latentdiff
