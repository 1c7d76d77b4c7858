#include "latentdiff/binning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "latentdiff/errors.hpp"

namespace latentdiff {

BinSpec::BinSpec(double y_min, double y_max, int bins) : y_min_(y_min), y_max_(y_max), bins_(bins) {
  if (bins < 2) throw ConfigError("BinSpec: bin count must be at least 2");
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_max > y_min))
    throw ConfigError("BinSpec: need finite y_min < y_max");
}

double BinSpec::edge(int k) const {
  if (k < 0 || k > bins_) throw RangeError("BinSpec::edge: index out of range");
  if (k == bins_) return y_max_;
  return y_min_ + k * ((y_max_ - y_min_) / bins_);
}

double BinSpec::center(int k) const {
  if (k < 0 || k >= bins_) throw RangeError("BinSpec::center: bin out of range");
  return 0.5 * (edge(k) + edge(k + 1));
}

std::vector<double> BinSpec::edges() const {
  std::vector<double> out;
  for (int k = 0; k <= bins_; ++k) out.push_back(edge(k));
  return out;
}

std::vector<double> BinSpec::centers() const {
  std::vector<double> out;
  for (int k = 0; k < bins_; ++k) out.push_back(center(k));
  return out;
}

int BinSpec::index(double y) const {
  if (!(y >= y_min_ && y <= y_max_)) {
    std::ostringstream os;
    os << "target " << y << " outside bin range [" << y_min_ << ", " << y_max_ << "]";
    throw RangeError(os.str());
  }
  int b = static_cast<int>(std::floor((y - y_min_) / (y_max_ - y_min_) * bins_));
  b = std::clamp(b, 0, bins_ - 1);
  // Rounding in the division can land one bin off near an edge; settle it
  // against the edges themselves so e_b <= y < e_{b+1} holds exactly.
  if (b + 1 < bins_ && y >= edge(b + 1)) ++b;
  if (b > 0 && y < edge(b)) --b;
  return b;
}

std::vector<int> BinSpec::indices(const Vector& targets) const {
  std::vector<int> out(static_cast<std::size_t>(targets.size()));
  for (Index i = 0; i < targets.size(); ++i) out[static_cast<std::size_t>(i)] = index(targets(i));
  return out;
}

std::vector<std::size_t> BinSpec::counts(const Vector& targets) const {
  std::vector<std::size_t> out(static_cast<std::size_t>(bins_), 0);
  for (Index i = 0; i < targets.size(); ++i) ++out[static_cast<std::size_t>(index(targets(i)))];
  return out;
}

std::string to_string(Shot shot) {
  switch (shot) {
    case Shot::many: return "many";
    case Shot::median: return "median";
    case Shot::few: return "few";
  }
  return "unknown";
}

ShotPartition shot_partition(std::span<const std::size_t> counts) {
  ShotPartition p;
  p.labels.reserve(counts.size());
  for (std::size_t c : counts) {
    if (c > ShotPartition::kManyAbove)
      p.labels.push_back(Shot::many);
    else if (c >= ShotPartition::kFewBelow)
      p.labels.push_back(Shot::median);
    else
      p.labels.push_back(Shot::few);
  }
  return p;
}

}  // namespace latentdiff
