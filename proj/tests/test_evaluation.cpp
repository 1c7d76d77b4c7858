#include <doctest.h>

#include <cmath>
#include <vector>

#include "latentdiff/errors.hpp"
#include "latentdiff/metrics.hpp"
#include "latentdiff/rng.hpp"

using namespace latentdiff;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("two point MAE and GM") {
  const std::vector<double> pred = {1.0, 4.0};
  const std::vector<double> y = {0.0, 0.0};
  const RegionMetrics r = region_metrics(pred, y);
  CHECK(r.mae == doctest::Approx(2.5));
  CHECK(r.gm == doctest::Approx(2.0));
  CHECK(r.mse == doctest::Approx(8.5));
  CHECK(geometric_mean_error(std::vector<double>{1.0, 100.0}) == doctest::Approx(10.0));
}

TEST_CASE("perfect linear predictions") {
  const std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
  const RegionMetrics r = region_metrics(y, y);
  CHECK(r.pearson == doctest::Approx(1.0));
  CHECK(r.r2 == doctest::Approx(1.0));
  CHECK(r.mse == 0.0);
  CHECK(r.gm == doctest::Approx(1e-8));
  const std::vector<double> scaled = {12.0, 14.0, 16.0, 18.0};
  CHECK(region_metrics(scaled, y).pearson == doctest::Approx(1.0));
}

TEST_CASE("degenerate correlation is flagged") {
  const std::vector<double> pred = {1.0, 1.0, 1.0};
  const std::vector<double> y = {1.0, 2.0, 3.0};
  const RegionMetrics r = region_metrics(pred, y);
  CHECK(r.pearson == 0.0);
  CHECK(r.pearson_degenerate);
  CHECK_FALSE(r.r2_degenerate);
  const RegionMetrics c = region_metrics(y, pred);
  CHECK(c.r2_degenerate);
  CHECK_THROWS(region_metrics(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS_AS(region_metrics(pred, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("GM is monotone and floored") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> e(8);
    for (double& v : e) v = rng.uniform(0.0, 5.0);
    const double base = geometric_mean_error(e);
    e[rng.index(8)] += 0.5;
    CHECK(geometric_mean_error(e) > base);
  }
  CHECK(geometric_mean_error(std::vector<double>{0.0, 1.0}) == doctest::Approx(1e-4));
}

TEST_CASE("pearson is invariant under positive affine rescaling") {
  Rng rng(5);
  std::vector<double> p(50), y(50), q(50);
  for (std::size_t i = 0; i < 50; ++i) {
    y[i] = rng.normal();
    p[i] = y[i] + 0.5 * rng.normal();
    q[i] = 3.0 * p[i] - 7.0;
  }
  const RegionMetrics a = region_metrics(p, y);
  const RegionMetrics b = region_metrics(q, y);
  CHECK(b.pearson == doctest::Approx(a.pearson).epsilon(1e-12));
  CHECK(a.pearson <= 1.0);
  CHECK(a.pearson >= -1.0);
}

TEST_CASE("regions partition the test set") {
  const BinSpec bins(0.0, 30.0, 3);
  const std::vector<std::size_t> train_counts = {100, 50, 10};
  const ShotPartition part = shot_partition(train_counts);
  Rng rng(6);
  Vector y(90), pred(90);
  for (Index i = 0; i < 90; ++i) {
    y(i) = rng.uniform(0.0, 30.0);
    pred(i) = y(i) + rng.normal();
  }
  const MetricsReport r = compute_metrics(pred, y, part, bins);
  const auto& all = *r.region(Region::all);
  std::size_t total = 0;
  double weighted = 0.0;
  for (Region g : {Region::many, Region::median, Region::few}) {
    REQUIRE(r.region(g).has_value());
    total += r.region(g)->count;
    weighted += r.region(g)->mae * static_cast<double>(r.region(g)->count);
  }
  CHECK(total == all.count);
  CHECK(weighted / static_cast<double>(total) == doctest::Approx(all.mae));
}

TEST_CASE("regions without test samples are absent") {
  const BinSpec bins(0.0, 20.0, 2);
  const ShotPartition part = shot_partition(std::vector<std::size_t>{100, 5});
  const MetricsReport r = compute_metrics(vec({1.0, 2.0}), vec({1.5, 2.5}), part, bins);
  CHECK(r.region(Region::many).has_value());
  CHECK_FALSE(r.region(Region::few).has_value());
  CHECK_FALSE(r.region(Region::median).has_value());
  const Json j = r.to_json();
  CHECK(j.at("metrics").at("mae.few").is_null());
  CHECK(j.at("metrics").at("count.few") == 0);
  CHECK(j.at("metrics").at("mae.all") == doctest::Approx(0.5));
  const MetricsReport back = MetricsReport::from_json(j);
  CHECK(back.to_json() == j);
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("region,count,mae,gm,mse,pearson,r2\n", 0) == 0);
  CHECK(csv.find("few,0,,,,,") != std::string::npos);
  CHECK_THROWS_AS(compute_metrics(vec({1.0}), vec({1.0, 2.0}), part, bins), DimensionError);
}

TEST_CASE("report comparison") {
  const BinSpec bins(0.0, 20.0, 2);
  const ShotPartition part = shot_partition(std::vector<std::size_t>{100, 5});
  const Vector y = vec({1.0, 2.0, 15.0, 16.0});
  const MetricsReport a = compute_metrics(vec({1.5, 2.5, 10.0, 10.0}), y, part, bins);
  const DeltaReport same = compare_reports(a, a);
  for (const auto& [key, d] : same.entries)
    if (d.delta) CHECK(*d.delta == 0.0);

  MetricsReport base = a, cand = a;
  base.regions[static_cast<std::size_t>(Region::few)]->mae = 18.21;
  cand.regions[static_cast<std::size_t>(Region::few)]->mae = 9.83;
  const MetricDelta d = compare_reports(base, cand).entries.at("mae.few");
  CHECK(*d.relative_percent == doctest::Approx(46.02).epsilon(1e-3));
  CHECK(*d.delta == doctest::Approx(9.83 - 18.21));

  // Higher is better for correlation metrics.
  base.regions[static_cast<std::size_t>(Region::few)]->r2 = 0.5;
  cand.regions[static_cast<std::size_t>(Region::few)]->r2 = 0.6;
  CHECK(*compare_reports(base, cand).entries.at("r2.few").relative_percent > 0.0);

  MetricsReport missing = a;
  missing.regions[static_cast<std::size_t>(Region::few)].reset();
  const MetricDelta gone = compare_reports(a, missing).entries.at("mae.few");
  CHECK_FALSE(gone.delta.has_value());
  CHECK_FALSE(gone.reason.empty());

  MetricsReport other = a;
  other.regions[static_cast<std::size_t>(Region::few)]->count += 1;
  CHECK_THROWS_AS(compare_reports(a, other), ConfigError);
}

}  // TEST_SUITE
