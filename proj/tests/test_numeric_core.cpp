#include <doctest.h>

#include <cmath>

#include "latentdiff/denoiser.hpp"
#include "latentdiff/errors.hpp"
#include "latentdiff/layers.hpp"
#include "latentdiff/optim.hpp"

using namespace latentdiff;

namespace {

// 0.5 * ||out - target||^2 summed over the batch.
double half_sq(const Matrix& out, const Matrix& target) { return 0.5 * (out - target).squaredNorm(); }

}  // namespace

TEST_SUITE("numeric-core") {

TEST_CASE("sinusoidal embedding at t=0 is alternating zeros and ones") {
  const RowVector e = sinusoidal_embed(0.0, 4);
  CHECK(e(0) == 0.0);
  CHECK(e(1) == 1.0);
  CHECK(e(2) == 0.0);
  CHECK(e(3) == 1.0);
}

TEST_CASE("sinusoidal embedding is pure and bounded") {
  const RowVector a = sinusoidal_embed(7.0, 64);
  const RowVector b = sinusoidal_embed(7.0, 64);
  CHECK(a == b);
  CHECK(a.maxCoeff() <= 1.0);
  CHECK(a.minCoeff() >= -1.0);
  CHECK_THROWS_AS(sinusoidal_embed(1.0, 5), ConfigError);
}

TEST_CASE("identity affine passes input through") {
  Rng rng(1);
  DenseNet net({{3, 3, Activation::identity, false, 0.0}}, rng);
  net.affines()[0] = Affine::identity(3);
  Matrix x = rng.normal_matrix(5, 3);
  CHECK(net.forward(x).isApprox(x));
  DenseNet::Cache cache;
  CHECK(net.forward(x, Mode::eval, rng, cache) == net.forward(x));
}

TEST_CASE("relu layer clips negatives") {
  Rng rng(1);
  DenseNet net({{2, 2, Activation::relu, false, 0.0}}, rng);
  net.affines()[0] = Affine::identity(2);
  Matrix x(1, 2);
  x << -1.0, 2.0;
  const Matrix y = net.forward(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 2.0);
}

TEST_CASE("forward rejects bad input") {
  Rng rng(1);
  DenseNet net({{3, 2, Activation::relu, false, 0.0}}, rng);
  CHECK_THROWS_AS(net.forward(Matrix::Zero(2, 4)), DimensionError);
  Matrix bad = Matrix::Zero(2, 3);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(net.forward(bad), NumericalError);
  CHECK_THROWS_AS(DenseNet({{3, 2}, {3, 1}}, rng), DimensionError);
}

TEST_CASE("dropout is inactive in eval mode and inverted in train mode") {
  Rng rng(3);
  DenseNet net({{4, 400, Activation::identity, false, 0.5}}, rng);
  Matrix x = Matrix::Ones(200, 4);
  DenseNet::Cache cache;
  const Matrix eval = net.forward(x, Mode::eval, rng, cache);
  CHECK(eval == net.forward(x));
  const Matrix train = net.forward(x, Mode::train, rng, cache);
  // Inverted scaling keeps the expectation: mean(train) ~ mean(eval).
  CHECK(train.mean() == doctest::Approx(eval.mean()).epsilon(0.05));
  const Matrix& mask = cache.layers[0].mask;
  CHECK(((mask.array() == 0.0) || (mask.array() == 2.0)).all());
}

TEST_CASE("single affine backward: dL/db equals the output for L = 0.5||y||^2") {
  Rng rng(5);
  DenseNet net({{3, 2, Activation::identity, false, 0.0}}, rng);
  Matrix x = rng.normal_matrix(1, 3);
  DenseNet::Cache cache;
  const Matrix y = net.forward(x, Mode::train, rng, cache);
  const Grads g = net.backward(cache, y);
  CHECK(g[1].isApprox(y));
  CHECK(g[0].isApprox(x.transpose() * y));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(6);
  DenseNet net({{3, 5, Activation::relu, true, 0.0}, {5, 2, Activation::identity, false, 0.0}}, rng);
  Matrix x = rng.normal_matrix(4, 3);
  DenseNet::Cache cache;
  net.forward(x, Mode::train, rng, cache);
  for (const Matrix& g : net.backward(cache, Matrix::Zero(4, 2))) CHECK(g.isZero());
}

TEST_CASE("backward rejects a cache from another network") {
  Rng rng(6);
  DenseNet a({{3, 2, Activation::relu, false, 0.0}}, rng);
  DenseNet b({{3, 2, Activation::relu, false, 0.0}}, rng);
  DenseNet::Cache cache;
  a.forward(Matrix::Ones(2, 3), Mode::train, rng, cache);
  CHECK_THROWS(b.backward(cache, Matrix::Ones(2, 2)));
  CHECK_THROWS_AS(a.backward(cache, Matrix::Ones(3, 2)), DimensionError);
}

TEST_CASE("gradient check: linear net with quadratic loss is exact") {
  Rng rng(7);
  DenseNet net({{4, 3, Activation::identity, false, 0.0}}, rng);
  const Matrix x = rng.normal_matrix(6, 4);
  const Matrix target = rng.normal_matrix(6, 3);
  DenseNet::Cache cache;
  const Matrix out = net.forward(x, Mode::train, rng, cache);
  const Grads analytic = net.backward(cache, out - target);
  const auto report = gradient_check(net.parameters(), [&] { return half_sq(net.forward(x), target); },
                                     analytic, 1e-5, 1e-8);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-8);
  CHECK(report.checked == 15);
}

TEST_CASE("gradient check: relu + layer norm + dropout stack") {
  Rng rng(8);
  DenseNet net({{5, 7, Activation::relu, true, 0.3},
                {7, 6, Activation::relu, false, 0.2},
                {6, 2, Activation::identity, true, 0.0}},
               rng);
  const Matrix x = rng.normal_matrix(9, 5);
  const Matrix target = rng.normal_matrix(9, 2);
  // Fixed dropout masks: every evaluation replays the same stream.
  auto run = [&](DenseNet::Cache& cache) {
    Rng mask_rng(99);
    return net.forward(x, Mode::train, mask_rng, cache);
  };
  DenseNet::Cache cache;
  const Matrix out = run(cache);
  const Grads analytic = net.backward(cache, out - target);
  const auto report = gradient_check(
      net.parameters(),
      [&] {
        DenseNet::Cache c;
        return half_sq(run(c), target);
      },
      analytic, 1e-5, 1e-4);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("gradient check: denoiser-shaped network") {
  Rng rng(9);
  DenoiserConfig cfg;
  cfg.feature_dim = 4;
  cfg.embed_width = 6;
  cfg.target_hidden = 5;
  cfg.hidden_width = 8;
  cfg.blocks = 2;
  cfg.dropout = 0.2;
  Denoiser net(cfg, rng);
  const Matrix z = rng.normal_matrix(5, 4);
  Vector y(5);
  y << 0.1, 0.3, 0.5, 0.7, 0.95;
  const std::vector<int> t{1, 7, 20, 33, 50};
  const Matrix target = rng.normal_matrix(5, 4);
  auto run = [&](Denoiser::Cache& cache) {
    Rng mask_rng(123);
    return net.forward(z, y, t, Mode::train, mask_rng, cache);
  };
  Denoiser::Cache cache;
  const Matrix out = run(cache);
  const Grads analytic = net.backward(cache, out - target);
  const auto report = gradient_check(
      net.parameters(),
      [&] {
        Denoiser::Cache c;
        return half_sq(run(c), target);
      },
      analytic, 1e-5, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("gradient check rejects h = 0") {
  Matrix p = Matrix::Ones(1, 1);
  CHECK_THROWS_AS(gradient_check({&p}, [] { return 0.0; }, {Matrix::Zero(1, 1)}, 0.0, 1e-4), ConfigError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Matrix p = Matrix::Constant(2, 3, 0.5);
  Adam adam({&p}, AdamConfig{0.1});
  CHECK(adam.step({&p}, {Matrix::Zero(2, 3)}) == StepStatus::applied);
  CHECK(p == Matrix::Constant(2, 3, 0.5));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam: first bias-corrected step moves each parameter by ~lr") {
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps) = 0.1 * 1 / (1 + 1e-8).
  Matrix p = Matrix::Constant(2, 2, 1.0);
  Adam adam({&p}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  REQUIRE(adam.step({&p}, {Matrix::Ones(2, 2)}) == StepStatus::applied);
  const double expected = 1.0 - 0.1 / (1.0 + 1e-8);
  for (Index i = 0; i < p.size(); ++i) CHECK(p.data()[i] == doctest::Approx(expected).epsilon(1e-12));
  adam.step({&p}, {Matrix::Ones(2, 2)});
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam: non-finite gradient is rejected without side effects") {
  Matrix p = Matrix::Ones(1, 2);
  Adam adam({&p}, AdamConfig{});
  Matrix g = Matrix::Ones(1, 2);
  g(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(adam.step({&p}, {g}) == StepStatus::rejected_non_finite);
  CHECK(adam.steps() == 0);
  CHECK(p == Matrix::Ones(1, 2));
  CHECK(adam.first_moment()[0].isZero());
  Matrix wrong = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(adam.step({&p}, {wrong}), DimensionError);
}

TEST_CASE("ema recurrence") {
  Matrix param = Matrix::Zero(2, 2);
  SUBCASE("decay 0 copies params") {
    Matrix init = Matrix::Ones(2, 2);
    EmaShadow ema({&init}, 0.0);
    ema.update({&param});
    CHECK(ema.shadow()[0] == param);
  }
  SUBCASE("decay 1 freezes the shadow") {
    Matrix init = Matrix::Ones(2, 2);
    EmaShadow ema({&init}, 1.0);
    ema.update({&param});
    CHECK(ema.shadow()[0] == Matrix::Ones(2, 2));
  }
  SUBCASE("decay 0.999 from 1 toward 0") {
    Matrix init = Matrix::Ones(2, 2);
    EmaShadow ema({&init}, 0.999);
    ema.update({&param});
    CHECK(ema.shadow()[0](0, 0) == doctest::Approx(0.999).epsilon(1e-15));
  }
  SUBCASE("elementwise recurrence holds on random values") {
    Rng rng(4);
    Matrix init = rng.normal_matrix(3, 5);
    EmaShadow ema({&init}, 0.9);
    for (int k = 0; k < 5; ++k) {
      const Matrix prev = ema.shadow()[0];
      const Matrix p = rng.normal_matrix(3, 5);
      ema.update({&p});
      // Same expression as the contract, (1 - decay) evaluated in double; FMA
      // contraction may differ by an ulp.
      const Matrix expected = 0.9 * prev + (1.0 - 0.9) * p;
      CHECK((ema.shadow()[0] - expected).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("rng determinism per (seed, stream)") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  const Matrix ma = a.normal_matrix(3, 3);
  CHECK(ma == b.normal_matrix(3, 3));
  CHECK(ma != c.normal_matrix(3, 3));
  Rng s1 = Rng::substream(1, "generate", 3);
  Rng s2 = Rng::substream(1, "generate", 3);
  Rng s3 = Rng::substream(1, "generate", 4);
  const double v = s1.uniform();
  CHECK(v == s2.uniform());
  CHECK(v != s3.uniform());
}

}  // TEST_SUITE
