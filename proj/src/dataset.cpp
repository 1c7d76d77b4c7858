#include "latentdiff/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "latentdiff/errors.hpp"

namespace latentdiff {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::string location(const std::filesystem::path& path, std::size_t line, std::size_t row,
                     std::size_t col, std::string_view column) {
  std::ostringstream os;
  os << path.string() << ": line " << line << " (row " << row << ", column " << col << " '"
     << column << "')";
  return os.str();
}

}  // namespace

void LabeledFeatureSet::validate() const {
  if (features.rows() < 1) throw Error("feature set '" + name + "' has no rows");
  if (features.cols() < 1) throw Error("feature set '" + name + "' has no feature columns");
  if (targets.size() != features.rows())
    throw DimensionError("feature set '" + name + "': " + std::to_string(features.rows()) +
                         " feature rows but " + std::to_string(targets.size()) + " targets");
  if (!features.allFinite()) throw NumericalError("feature set '" + name + "' has non-finite features");
  if (!targets.allFinite()) throw NumericalError("feature set '" + name + "' has non-finite targets");
}

void LabeledFeatureSet::validate_range(double y_min, double y_max) const {
  for (Index i = 0; i < targets.size(); ++i) {
    if (targets(i) < y_min || targets(i) > y_max) {
      std::ostringstream os;
      os << "feature set '" << name << "': target " << targets(i) << " at row " << i
         << " lies outside [" << y_min << ", " << y_max << "]";
      throw RangeError(os.str());
    }
  }
}

LabeledFeatureSet LabeledFeatureSet::subset(std::span<const Index> rows) const {
  LabeledFeatureSet out;
  out.name = name;
  out.features.resize(static_cast<Index>(rows.size()), dim());
  out.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = features.row(rows[i]);
    out.targets(static_cast<Index>(i)) = targets(rows[i]);
  }
  return out;
}

LabeledFeatureSet make_feature_set(Matrix features, Vector targets, std::string name) {
  LabeledFeatureSet set{std::move(features), std::move(targets), std::move(name)};
  set.validate();
  return set;
}

LabeledFeatureSet concat(const LabeledFeatureSet& a, const LabeledFeatureSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.dim() != b.dim()) throw DimensionError("concat: feature widths differ");
  LabeledFeatureSet out;
  out.name = a.name;
  out.features.resize(a.size() + b.size(), a.dim());
  out.features << a.features, b.features;
  out.targets.resize(a.size() + b.size());
  out.targets << a.targets, b.targets;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

LabeledFeatureSet load_csv(const std::filesystem::path& path, std::optional<Index> expected_dim, bool allow_empty) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const std::vector<std::string_view> header = split_commas(line);
  std::vector<std::string> columns(header.begin(), header.end());
  std::size_t feature_cols = 0;
  while (feature_cols < columns.size() && columns[feature_cols] == "f" + std::to_string(feature_cols))
    ++feature_cols;
  if (feature_cols == 0)
    throw ParseError(path.string() + ": header must start with column 'f0'");
  if (feature_cols >= columns.size() || columns[feature_cols] != "target")
    throw ParseError(path.string() + ": missing column 'target' after f" +
                     std::to_string(feature_cols - 1));
  const bool has_origin = columns.size() == feature_cols + 2 && columns.back() == "origin";
  if (columns.size() != feature_cols + 1 && !has_origin)
    throw ParseError(path.string() + ": unexpected column '" + columns[feature_cols + 1] + "'");
  if (expected_dim && static_cast<Index>(feature_cols) != *expected_dim)
    throw ParseError(path.string() + ": expected " + std::to_string(*expected_dim) +
                     " feature columns, header has " + std::to_string(feature_cols));

  std::vector<double> values;
  std::vector<double> targets;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string_view> cells = split_commas(line);
    if (cells.size() != columns.size()) {
      std::ostringstream os;
      os << path.string() << ": line " << line_no << " (row " << row << ") has " << cells.size()
         << " cells, header has " << columns.size();
      throw ParseError(os.str());
    }
    for (std::size_t c = 0; c <= feature_cols; ++c) {
      const std::optional<double> v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError(location(path, line_no, row, c, columns[c]) + ": cannot parse '" +
                         std::string(cells[c]) + "' as a finite number");
      if (c < feature_cols)
        values.push_back(*v);
      else
        targets.push_back(*v);
    }
  }
  if (row == 0 && !allow_empty) throw ParseError(path.string() + ": no data rows");

  LabeledFeatureSet set;
  set.name = path.stem().string();
  set.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(row), static_cast<Index>(feature_cols));
  set.targets = Eigen::Map<const Vector>(targets.data(), static_cast<Index>(row));
  if (row > 0) set.validate();
  return set;
}

void save_csv(const std::filesystem::path& path, const LabeledFeatureSet& set,
              const std::string& origin) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  for (Index c = 0; c < set.dim(); ++c) out << 'f' << c << ',';
  out << "target";
  if (!origin.empty()) out << ",origin";
  out << '\n';
  for (Index r = 0; r < set.size(); ++r) {
    for (Index c = 0; c < set.dim(); ++c) out << format_double(set.features(r, c)) << ',';
    out << format_double(set.targets(r));
    if (!origin.empty()) out << ',' << origin;
    out << '\n';
  }
  if (!out) throw Error(path.string() + ": write failed");
}

// ---------------------------------------------------------------- Standardizer

Standardizer::Standardizer(RowVector mean, RowVector stddev, std::vector<bool> constant)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), constant_(std::move(constant)), fitted_(true) {
  if (mean_.size() != stddev_.size() || static_cast<Index>(constant_.size()) != mean_.size())
    throw DimensionError("Standardizer: inconsistent statistic lengths");
}

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() < 2) throw Error("Standardizer::fit needs at least two rows");
  const double n = static_cast<double>(x.rows());
  RowVector mean = x.colwise().sum() / n;
  RowVector sd = ((x.rowwise() - mean).array().square().colwise().sum() / n).sqrt().matrix();
  std::vector<bool> constant(static_cast<std::size_t>(x.cols()), false);
  std::size_t flagged = 0;
  for (Index c = 0; c < x.cols(); ++c) {
    if (!(sd(c) > 1e-12 * std::max(1.0, std::abs(mean(c))))) {
      sd(c) = 1.0;
      constant[static_cast<std::size_t>(c)] = true;
      ++flagged;
    }
  }
  if (flagged > 0)
    spdlog::warn("standardizer: {} constant column(s) kept with unit scale", flagged);
  return Standardizer(std::move(mean), std::move(sd), std::move(constant));
}

Matrix Standardizer::transform(const Matrix& x) const {
  if (!fitted_) throw Error("Standardizer used before fit");
  if (x.cols() != dim()) throw DimensionError("Standardizer::transform: width mismatch");
  return ((x.rowwise() - mean_).array().rowwise() / stddev_.array()).matrix();
}

Matrix Standardizer::inverse_transform(const Matrix& z) const {
  if (!fitted_) throw Error("Standardizer used before fit");
  if (z.cols() != dim()) throw DimensionError("Standardizer::inverse_transform: width mismatch");
  Matrix x = (z.array().rowwise() * stddev_.array()).matrix();
  x.rowwise() += mean_;
  return x;
}

std::size_t Standardizer::constant_count() const {
  return static_cast<std::size_t>(std::count(constant_.begin(), constant_.end(), true));
}

Standardized standardize_fit_transform(const LabeledFeatureSet& set) {
  Standardized out;
  out.standardizer = Standardizer::fit(set.features);
  out.set = set;
  out.set.features = out.standardizer.transform(set.features);
  return out;
}

}  // namespace latentdiff
