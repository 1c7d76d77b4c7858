#include "latentdiff/gate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "latentdiff/errors.hpp"

namespace latentdiff {

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("nearest_rank_quantile: no values");
  if (!(q > 0.0 && q <= 1.0)) throw RangeError("nearest_rank_quantile: q must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

QualityGate QualityGate::fit(const Matrix& features, const Vector& targets, const BinSpec& bins,
                             const GateOptions& options) {
  if (features.rows() != targets.size()) throw DimensionError("fit_gate: features/targets length mismatch");
  if (!(options.percentile > 0.0 && options.percentile <= 1.0))
    throw RangeError("fit_gate: percentile must lie in (0, 1]");
  if (options.shrinkage < 0.0 || options.shrinkage > 1.0)
    throw RangeError("fit_gate: shrinkage must lie in [0, 1]");

  const Index m = features.cols();
  QualityGate gate;
  gate.options_ = options;
  gate.bins_.resize(static_cast<std::size_t>(bins.bins()));

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(bins.bins()));
  for (Index i = 0; i < targets.size(); ++i)
    members[static_cast<std::size_t>(bins.index(targets(i)))].push_back(i);

  for (int b = 0; b < bins.bins(); ++b) {
    BinGate& g = gate.bins_[static_cast<std::size_t>(b)];
    const std::vector<Index>& rows = members[static_cast<std::size_t>(b)];
    g.samples = rows.size();
    if (rows.size() < options.min_samples || rows.empty()) continue;

    Matrix x(static_cast<Index>(rows.size()), m);
    for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Index>(r)) = features.row(rows[r]);
    g.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - g.mean;
    const double denom = std::max<double>(1.0, static_cast<double>(rows.size()) - 1.0);
    Matrix sample_cov = (centered.transpose() * centered) / denom;
    const double avg_var = sample_cov.trace() / static_cast<double>(m);

    g.diagonal = options.diagonal_fallback && static_cast<Index>(rows.size()) <= m;
    if (g.diagonal) sample_cov = Matrix(sample_cov.diagonal().asDiagonal());
    g.covariance = (1.0 - options.shrinkage) * sample_cov;
    g.covariance.diagonal().array() += options.shrinkage * avg_var;

    Eigen::LLT<Matrix> llt(g.covariance);
    const double floor = 1e-12 * std::max(1.0, g.covariance.diagonal().cwiseAbs().maxCoeff());
    if (llt.info() != Eigen::Success || !(Matrix(llt.matrixL()).diagonal().minCoeff() > std::sqrt(floor)))
      throw NumericalError("fit_gate: covariance of bin " + std::to_string(b) + " (" +
                           std::to_string(rows.size()) + " samples, m=" + std::to_string(m) +
                           ") is singular after regularization");
    g.cholesky = llt.matrixL();
    g.gated = true;

    std::vector<double> d(rows.size());
    const Vector dist = gate.distances(b, x);
    for (std::size_t r = 0; r < rows.size(); ++r) d[r] = dist(static_cast<Index>(r));
    g.threshold = nearest_rank_quantile(std::move(d), options.percentile);
  }
  return gate;
}

const BinGate& QualityGate::bin(int b) const {
  if (b < 0 || b >= bins()) throw RangeError("quality gate: unknown bin id " + std::to_string(b));
  return bins_[static_cast<std::size_t>(b)];
}

Vector QualityGate::distances(int b, const Matrix& z) const {
  const BinGate& g = bin(b);
  if (!g.gated) throw Error("quality gate: bin " + std::to_string(b) + " is ungated");
  if (z.cols() != g.mean.size()) throw DimensionError("quality gate: candidate width mismatch");
  const Matrix diff = (z.rowwise() - g.mean).transpose();
  const Matrix solved = g.cholesky.triangularView<Eigen::Lower>().solve(diff);
  return solved.colwise().norm().transpose();
}

double QualityGate::distance(int b, const RowVector& z) const { return distances(b, z)(0); }

QualityGate::FilterResult QualityGate::filter(const Matrix& candidates, int b) const {
  const BinGate& g = bin(b);
  FilterResult out;
  if (candidates.rows() == 0) {
    out.accepted = candidates;
    out.ungated = !g.gated;
    return out;
  }
  if (!g.gated) {
    out.accepted = candidates;
    out.ungated = true;
    spdlog::debug("quality gate: bin {} ungated, {} candidates passed unchecked", b, candidates.rows());
    return out;
  }
  const Vector d = distances(b, candidates);
  std::vector<Index> keep;
  for (Index r = 0; r < d.size(); ++r)
    if (d(r) <= g.threshold) keep.push_back(r);
  out.accepted.resize(static_cast<Index>(keep.size()), candidates.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.accepted.row(static_cast<Index>(i)) = candidates.row(keep[i]);
  out.rejected = static_cast<std::size_t>(candidates.rows()) - keep.size();
  return out;
}

Json QualityGate::summary() const {
  Json bins_json = Json::array();
  for (std::size_t b = 0; b < bins_.size(); ++b) {
    const BinGate& g = bins_[b];
    bins_json.push_back({{"bin", b},
                         {"samples", g.samples},
                         {"gated", g.gated},
                         {"diagonal", g.diagonal},
                         {"threshold", g.gated ? Json(g.threshold) : Json(nullptr)}});
  }
  return Json{{"percentile", options_.percentile},
              {"min_samples", options_.min_samples},
              {"shrinkage", options_.shrinkage},
              {"diagonal_fallback", options_.diagonal_fallback},
              {"bins", bins_json}};
}

}  // namespace latentdiff
