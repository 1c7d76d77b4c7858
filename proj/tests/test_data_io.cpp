#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "latentdiff/binning.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/errors.hpp"
#include "latentdiff/rng.hpp"
#include "latentdiff/synthetic.hpp"
#include "test_util.hpp"

using namespace latentdiff;

TEST_SUITE("data-io") {

TEST_CASE("load_csv parses a small file") {
  test::TempDir dir;
  const auto path = dir.path() / "a.csv";
  test::write_text(path, "f0,f1,target\n1,2,3\n4,5,6\n7,8,9\n");
  const LabeledFeatureSet s = load_csv(path);
  CHECK(s.size() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.features(1, 0) == 4.0);
  CHECK(s.targets(2) == 9.0);
}

TEST_CASE("load_csv names the bad cell") {
  test::TempDir dir;
  const auto path = dir.path() / "bad.csv";
  test::write_text(path, "f0,f1,target\n1,2,3\n4,abc,6\n");
  try {
    (void)load_csv(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row") != std::string::npos);
    CHECK(msg.find("f1") != std::string::npos);
  }
}

TEST_CASE("load_csv rejects empty files and missing columns") {
  test::TempDir dir;
  test::write_text(dir.path() / "empty.csv", "");
  CHECK_THROWS_AS(load_csv(dir.path() / "empty.csv"), ParseError);
  test::write_text(dir.path() / "nohead.csv", "f0,f1\n1,2\n");
  CHECK_THROWS_AS(load_csv(dir.path() / "nohead.csv"), ParseError);
  test::write_text(dir.path() / "short.csv", "f0,f1,target\n1,2\n");
  CHECK_THROWS_AS(load_csv(dir.path() / "short.csv"), ParseError);
  test::write_text(dir.path() / "ok.csv", "f0,f1,target\n1,2,3\n");
  CHECK_THROWS_AS(load_csv(dir.path() / "ok.csv", Index{3}), ParseError);
  CHECK_THROWS(load_csv(dir.path() / "missing.csv"));
}

TEST_CASE("save_csv and load_csv round trip exactly") {
  test::TempDir dir;
  Rng rng(3);
  LabeledFeatureSet s = make_feature_set(rng.normal_matrix(50, 4) * 1e3, rng.normal_matrix(50, 1).col(0));
  s.features(0, 0) = 1.0 / 3.0;
  s.features(1, 1) = -1e-300;
  save_csv(dir.path() / "rt.csv", s, "real");
  const LabeledFeatureSet back = load_csv(dir.path() / "rt.csv", Index{4});
  CHECK(back.features == s.features);
  CHECK(back.targets == s.targets);
}

TEST_CASE("non-finite values are rejected") {
  Matrix x(2, 1);
  x << 1.0, std::nan("");
  CHECK_THROWS(make_feature_set(x, Vector::Zero(2)));
}

TEST_CASE("targets outside the declared range are a hard error") {
  const LabeledFeatureSet s = make_feature_set(Matrix::Zero(2, 1), Vector::LinSpaced(2, 0.0, 120.0));
  CHECK_THROWS_AS(s.validate_range(0.0, 100.0), RangeError);
  CHECK_NOTHROW(s.validate_range(0.0, 120.0));
}

TEST_CASE("bin index follows the floor rule with the top edge clamped") {
  const BinSpec layout(0.0, 100.0, 20);
  CHECK(layout.index(7.0) == 1);
  CHECK(layout.center(1) == doctest::Approx(7.5));
  CHECK(layout.index(0.0) == 0);
  CHECK(layout.center(0) == doctest::Approx(2.5));
  CHECK(layout.index(100.0) == 19);
  CHECK(layout.center(19) == doctest::Approx(97.5));
  CHECK_THROWS_AS(layout.index(-0.1), RangeError);
  CHECK_THROWS_AS(layout.index(100.1), RangeError);
  CHECK_THROWS(BinSpec(0.0, 1.0, 1));
  CHECK_THROWS(BinSpec(1.0, 1.0, 4));
}

TEST_CASE("binning is total and stable over random targets") {
  const BinSpec layout(-3.0, 17.0, 13);
  Rng rng(11);
  Vector y(2000);
  for (Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(-3.0, 17.0);
  y(0) = 17.0;
  y(1) = -3.0;
  for (Index i = 0; i < y.size(); ++i) {
    const int b = layout.index(y(i));
    CHECK(layout.edge(b) <= y(i));
    CHECK(y(i) <= layout.edge(b + 1));
    if (y(i) == layout.edge(b + 1)) CHECK(y(i) == 17.0);
  }
  const auto counts = layout.counts(y);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 2000);
  const auto edges = layout.edges();
  for (std::size_t k = 1; k < edges.size(); ++k) CHECK(edges[k] > edges[k - 1]);
}

TEST_CASE("shot partition thresholds") {
  const std::vector<std::size_t> counts = {100, 50, 10, 70, 30, 71, 29, 0};
  const ShotPartition p = shot_partition(counts);
  const std::vector<Shot> want = {Shot::many, Shot::median, Shot::few, Shot::median,
                                  Shot::median, Shot::many, Shot::few, Shot::few};
  CHECK(p.labels == want);
  CHECK(shot_partition(std::vector<std::size_t>(5, 0)).labels == std::vector<Shot>(5, Shot::few));
}

TEST_CASE("shot partition ignores row order") {
  const SyntheticConfig cfg{.n = 800, .m = 3, .bins = 10, .decay = 0.7, .seed = 4};
  LabeledFeatureSet s = make_imbalanced_synthetic(cfg);
  const BinSpec layout(0.0, 100.0, 10);
  std::vector<Index> rows(static_cast<std::size_t>(s.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::reverse(rows.begin(), rows.end());
  const LabeledFeatureSet r = s.subset(rows);
  CHECK(shot_partition(layout.counts(s.targets)) == shot_partition(layout.counts(r.targets)));
}

TEST_CASE("standardizer on a two-point column") {
  Matrix x(2, 2);
  x << 0.0, 5.0, 2.0, 5.0;
  const Standardized st = standardize_fit_transform(make_feature_set(x, Vector::Zero(2)));
  CHECK(st.set.features(0, 0) == doctest::Approx(-1.0));
  CHECK(st.set.features(1, 0) == doctest::Approx(1.0));
  CHECK(st.set.features(0, 1) == 0.0);
  CHECK(st.set.features(1, 1) == 0.0);
  CHECK(st.standardizer.constant()[1]);
  CHECK_FALSE(st.standardizer.constant()[0]);
  CHECK(st.standardizer.stddev()(1) == 1.0);
}

TEST_CASE("standardizer moments and inverse") {
  Rng rng(8);
  Matrix x = rng.normal_matrix(300, 6) * 4.0;
  x.col(2).array() += 100.0;
  const Standardizer s = Standardizer::fit(x);
  const Matrix z = s.transform(x);
  for (Index j = 0; j < z.cols(); ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-8);
    CHECK(std::abs(std::sqrt(z.col(j).squaredNorm() / z.rows()) - 1.0) < 1e-8);
  }
  CHECK((s.inverse_transform(z) - x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS(Standardizer::fit(x.topRows(1)));
  CHECK_THROWS(s.transform(x.leftCols(3)));
}

TEST_CASE("synthetic benchmark decays geometrically") {
  const SyntheticConfig cfg{.n = 5000, .m = 8, .bins = 20, .decay = 0.7, .seed = 1};
  const LabeledFeatureSet s = make_imbalanced_synthetic(cfg);
  CHECK(s.size() == 5000);
  CHECK(s.dim() == 8);
  const auto counts = BinSpec(0.0, 100.0, 20).counts(s.targets);
  for (std::size_t c : counts) CHECK(c >= 1);
  CHECK(counts.front() > 1000);
  CHECK(counts.back() <= 5);
  // Ratio of the first five bins to the next five follows decay^5.
  const double head = std::accumulate(counts.begin(), counts.begin() + 5, 0.0);
  const double next = std::accumulate(counts.begin() + 5, counts.begin() + 10, 0.0);
  CHECK(next / head == doctest::Approx(std::pow(0.7, 5)).epsilon(0.15));
}

TEST_CASE("synthetic benchmark without decay is roughly uniform") {
  const SyntheticConfig cfg{.n = 4000, .m = 4, .bins = 10, .decay = 1.0, .seed = 2};
  const auto counts = BinSpec(0.0, 100.0, 10).counts(make_imbalanced_synthetic(cfg).targets);
  for (std::size_t c : counts) CHECK(std::abs(static_cast<double>(c) - 400.0) < 5.0 * std::sqrt(400.0));
}

TEST_CASE("synthetic benchmark is deterministic and noise-free at sigma 0") {
  const SyntheticConfig cfg{.n = 300, .m = 6, .bins = 10, .decay = 0.8, .noise = 0.0, .seed = 9};
  const LabeledFeatureSet a = make_imbalanced_synthetic(cfg);
  const LabeledFeatureSet b = make_imbalanced_synthetic(cfg);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  for (Index i = 0; i < 10; ++i) {
    const double y = a.targets(i);
    const RowVector f = synthetic_feature_map(y, 6);
    CHECK((a.features.row(i) - f).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f(0) == doctest::Approx(y / 100.0));
    CHECK(f(1) == doctest::Approx(std::sin(y / 10.0)));
    CHECK(f(2) == doctest::Approx(std::cos(y / 15.0)));
    CHECK(f(3) == doctest::Approx(y * y / 1e4));
  }
  CHECK_THROWS(make_imbalanced_synthetic(SyntheticConfig{.n = 5, .bins = 10}));
}

}  // TEST_SUITE
