// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion 8   run one criterion
//
// Criterion 9 needs a housing-format CSV (f0..f7,target) passed with --csv or
// the LATENTDIFF_HOUSING_CSV environment variable; without one it is skipped.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latentdiff/config.hpp"
#include "latentdiff/denoiser.hpp"
#include "latentdiff/diffusion.hpp"
#include "latentdiff/gate.hpp"
#include "latentdiff/metrics.hpp"
#include "latentdiff/optim.hpp"
#include "latentdiff/pipeline.hpp"
#include "latentdiff/priority.hpp"
#include "latentdiff/rng.hpp"
#include "latentdiff/schedule.hpp"
#include "latentdiff/serialize.hpp"

using namespace latentdiff;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome = Outcome::fail;
  std::string detail;
};

Verdict check(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ------------------------------------------------------------------ 1

Verdict schedule_correctness() {
  auto f = [](double t, double T, double s) {
    const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<std::string> problems;
  for (int T : {10, 50, 100}) {
    const NoiseSchedule s = build_schedule(ScheduleKind::cosine, T, 0.008);
    if (s.alpha_bar(0) != 1.0) problems.push_back(fmt::format("T={} alpha_bar(0)={}", T, s.alpha_bar(0)));
    if (s.alpha_bar(T) > 1e-10) problems.push_back(fmt::format("T={} alpha_bar(T)={}", T, s.alpha_bar(T)));
    for (int t = 1; t <= T; ++t)
      if (!(s.alpha_bar(t) < s.alpha_bar(t - 1))) problems.push_back(fmt::format("T={} not decreasing at {}", T, t));
  }
  const NoiseSchedule s = build_schedule(ScheduleKind::cosine, 50, 0.008);
  const double direct = f(25, 50, 0.008) / f(0, 50, 0.008);
  const double err = std::abs(s.alpha_bar(25) - direct);
  if (err > 1e-6) problems.push_back(fmt::format("midpoint off by {:.3g}", err));
  return check(problems.empty(), problems.empty()
                                     ? fmt::format("T in {{10,50,100}}; alpha_bar(25)={:.6f} at T=50, |err|={:.1e}",
                                                   s.alpha_bar(25), err)
                                     : problems.front());
}

// ------------------------------------------------------------------ 2

Verdict v_identity() {
  Rng rng(2024);
  const NoiseSchedule s = build_schedule(ScheduleKind::cosine, 50, 0.008);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int t = 1 + static_cast<int>(rng.index(50));
    const Matrix z0 = rng.normal_matrix(1, 8);
    const Matrix eps = rng.normal_matrix(1, 8);
    const Matrix zt = forward_sample(s, z0, t, eps);
    const Matrix back = recover_z0(s, zt, velocity_target(s, z0, eps, t), t);
    worst = std::max(worst, (back - z0).cwiseAbs().maxCoeff());
  }
  return check(worst <= 1e-10, fmt::format("max-norm error {:.2e} over 1000 triples (tol 1e-10)", worst));
}

// ------------------------------------------------------------------ 3

Verdict gradient_fidelity() {
  Rng rng(3);
  DenoiserConfig cfg;
  cfg.feature_dim = 8;
  cfg.embed_width = 16;
  cfg.target_hidden = 8;
  cfg.hidden_width = 24;
  cfg.blocks = 3;
  cfg.dropout = 0.1;
  Denoiser net(cfg, rng);
  const Matrix z = rng.normal_matrix(6, 8);
  // y = 0 with a zero-initialised bias sits exactly on a ReLU kink.
  Vector y(6);
  y << 0.05, 0.2, 0.4, 0.6, 0.8, 1.0;
  const std::vector<int> t{1, 5, 12, 25, 40, 50};
  const Matrix target = rng.normal_matrix(6, 8);
  auto run = [&](Denoiser::Cache& cache) {
    Rng mask_rng(77);
    return net.forward(z, y, t, Mode::train, mask_rng, cache);
  };
  Denoiser::Cache cache;
  const Matrix out = run(cache);
  const Grads analytic = net.backward(cache, out - target);
  const auto report = gradient_check(
      net.parameters(),
      [&] {
        Denoiser::Cache c;
        return 0.5 * (run(c) - target).squaredNorm();
      },
      analytic, 1e-5, 1e-4);
  return check(report.passed && report.max_relative_error <= 1e-4,
               fmt::format("{} parameters, max relative error {:.2e} (tol 1e-4)", report.checked,
                           report.max_relative_error));
}

// ------------------------------------------------------------------ 4

Verdict toy_generation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Index m = 8, n = 4000;
  Rng rng(4);
  Matrix x(n, m);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = i % 2 == 0 ? 0.2 : 0.8;
    x.row(i) = RowVector::Constant(m, y(i)) + rng.normal_matrix(1, m);
  }
  DiffusionTrainConfig c;
  c.epochs = 60;
  c.seed = 4;
  const BinSpec bins(0.0, 1.0, 2);
  const DiffusionTrainResult r = train_diffusion(x, y, bins, c);
  double worst_mean = 0.0, worst_var = 0.0;
  for (double cond : {0.2, 0.8}) {
    const Matrix s = reverse_sample(r.model, cond, 2000, cond < 0.5 ? 11 : 12);
    for (Index j = 0; j < m; ++j) {
      const double mu = s.col(j).mean();
      const double var = (s.col(j).array() - mu).square().sum() / static_cast<double>(s.rows() - 1);
      worst_mean = std::max(worst_mean, std::abs(mu - cond));
      worst_var = std::max(worst_var, std::abs(var - 1.0));
    }
  }
  const double elapsed = seconds_since(t0);
  return check(worst_mean <= 0.15 && worst_var <= 0.25 && elapsed < 120.0,
               fmt::format("max |mean - y| {:.3f} (tol 0.15), max |var - 1| {:.3f} (tol 0.25), {:.0f}s", worst_mean,
                           worst_var, elapsed));
}

// ------------------------------------------------------------------ 5

struct CalibrationCase {
  std::string name;
  bool correlated;
  double shrinkage;
};

// Bin b: N(mu_b, A_b A_b^T). A_b is a per-bin scale (isotropic case) or a
// random mixing matrix (correlated case).
Verdict gate_calibration() {
  const Index m = 8;
  const int k = 3;
  const Index per_bin = 3000;
  const BinSpec bins(0.0, 3.0, k);
  // Shrinkage toward (tr/m) I leaves an isotropic covariance unchanged, so the
  // default 0.1 is exercised there; correlated bins are checked unshrunk.
  const std::vector<CalibrationCase> cases = {{"isotropic, rho=0.1", false, 0.1},
                                              {"correlated, rho=0", true, 0.0}};
  bool ok = true;
  std::string detail;
  Rng rng(5);
  for (const CalibrationCase& cc : cases) {
    std::vector<Matrix> mix;
    std::vector<RowVector> mu;
    Matrix x(k * per_bin, m);
    Vector y(k * per_bin);
    for (int b = 0; b < k; ++b) {
      mix.push_back(cc.correlated ? Matrix(Matrix::Identity(m, m) + 0.4 * rng.normal_matrix(m, m))
                                  : Matrix((0.5 + b) * Matrix::Identity(m, m)));
      mu.push_back(RowVector::Constant(m, 2.0 * b));
      for (Index i = 0; i < per_bin; ++i) {
        x.row(b * per_bin + i) = mu.back() + rng.normal_matrix(1, m) * mix.back().transpose();
        y(b * per_bin + i) = bins.center(b);
      }
    }
    GateOptions opt;
    opt.percentile = 0.95;
    opt.shrinkage = cc.shrinkage;
    const QualityGate gate = QualityGate::fit(x, y, bins, opt);
    double worst_rate = 0.95, worst_ratio = 1.0;
    for (int b = 0; b < k; ++b) {
      const Matrix held = mu[b].replicate(10000, 1) + rng.normal_matrix(10000, m) * mix[b].transpose();
      const Vector d = gate.distances(b, held);
      const double rate = static_cast<double>((d.array() <= gate.bin(b).threshold).count()) / 10000.0;
      const double ratio = d.array().square().mean() / static_cast<double>(m);
      if (std::abs(rate - 0.95) > std::abs(worst_rate - 0.95)) worst_rate = rate;
      if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
      ok = ok && std::abs(rate - 0.95) <= 0.03 && std::abs(ratio - 1.0) <= 0.05;
    }
    detail += fmt::format("{}{}: worst accept {:.3f}, worst mean d^2/m {:.3f}", detail.empty() ? "" : "; ", cc.name,
                          worst_rate, worst_ratio);
  }
  return check(ok, detail + " (3 bins x 10000 draws, tol 0.03 / 5%)");
}

// ------------------------------------------------------------------ 6

// Independent re-derivation of the priority mix and largest-remainder rounding.
std::vector<double> oracle_probability(const std::vector<double>& e, const std::vector<std::size_t>& n,
                                       double lambda) {
  std::size_t top = 0;
  for (std::size_t c : n) top = std::max(top, c);
  double err_sum = 0.0;
  int seen = 0;
  for (std::size_t b = 0; b < n.size(); ++b)
    if (n[b] > 0) {
      err_sum += e[b];
      ++seen;
    }
  std::vector<long double> raw(n.size());
  long double total = 0.0L;
  for (std::size_t b = 0; b < n.size(); ++b) {
    const long double err = n[b] > 0 ? e[b] : err_sum / seen;
    raw[b] = lambda * err + (1.0L - lambda) * (1.0L - static_cast<long double>(n[b]) / top);
    total += raw[b];
  }
  std::vector<double> p(n.size());
  for (std::size_t b = 0; b < n.size(); ++b)
    p[b] = total > 0.0L ? static_cast<double>(raw[b] / total) : 1.0 / static_cast<double>(n.size());
  return p;
}

std::vector<std::size_t> oracle_quota(const std::vector<double>& p, std::size_t total) {
  std::vector<std::size_t> q(p.size());
  std::vector<double> rem(p.size());
  std::size_t given = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double exact = static_cast<double>(total) * p[b];
    q[b] = static_cast<std::size_t>(std::floor(exact));
    rem[b] = exact - std::floor(exact);
    given += q[b];
  }
  std::vector<bool> used(p.size(), false);
  while (given < total) {
    std::size_t best = p.size();
    for (std::size_t b = 0; b < p.size(); ++b)
      if (!used[b] && (best == p.size() || rem[b] > rem[best])) best = b;
    if (best == p.size()) {
      std::fill(used.begin(), used.end(), false);
      continue;
    }
    used[best] = true;
    ++q[best];
    ++given;
  }
  return q;
}

Verdict priority_oracle() {
  Rng rng(6);
  int quota_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.index(24);
    std::vector<double> e(k);
    std::vector<std::size_t> n(k);
    for (std::size_t b = 0; b < k; ++b) {
      e[b] = rng.uniform(0.0, 20.0);
      n[b] = rng.index(4) == 0 ? 0 : rng.index(500);
    }
    n[rng.index(k)] = 1 + rng.index(500);
    const double lambda = trial % 10 == 0 ? static_cast<double>(trial % 3) / 2.0 : rng.uniform();
    const std::size_t total = rng.index(20000);
    const PriorityState got = priority_scores(e, n, PriorityOptions{lambda});
    const std::vector<double> want = oracle_probability(e, n, lambda);
    for (std::size_t b = 0; b < k; ++b) worst = std::max(worst, std::abs(got.probability[b] - want[b]));
    const AllocationPlan plan = allocate_budget(got.probability, total, AllocationMode::priority);
    if (plan.quota != oracle_quota(got.probability, total)) ++quota_mismatch;
  }
  return check(quota_mismatch == 0 && worst <= 1e-12,
               fmt::format("200 instances: {} quota mismatches, max probability error {:.1e} (tol 1e-12)",
                           quota_mismatch, worst));
}

// ------------------------------------------------------------------ 7

Verdict metric_oracles() {
  std::vector<std::string> bad;
  auto expect = [&](const char* what, double got, double want) {
    if (std::abs(got - want) > 1e-12) bad.push_back(fmt::format("{}={} want {}", what, got, want));
  };
  const RegionMetrics two = region_metrics(std::vector<double>{1.0, 4.0}, std::vector<double>{0.0, 0.0});
  expect("GM{1,4}", two.gm, 2.0);
  expect("MAE{1,4}", two.mae, 2.5);
  expect("MSE{1,4}", two.mse, 8.5);
  const std::vector<double> y = {1.0, 2.0, 3.0, 4.0, 5.0};
  const RegionMetrics perfect = region_metrics(y, y);
  expect("Pearson(identity)", perfect.pearson, 1.0);
  expect("R2(identity)", perfect.r2, 1.0);
  expect("MSE(identity)", perfect.mse, 0.0);
  const RegionMetrics affine = region_metrics(std::vector<double>{3.0, 5.0, 7.0, 9.0, 11.0}, y);
  expect("Pearson(linear)", affine.pearson, 1.0);
  // Hand computation: errors {0.5, -0.5, 1, 0}, y mean 2.5.
  const RegionMetrics hand =
      region_metrics(std::vector<double>{1.5, 1.5, 4.0, 4.0}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  expect("MAE(hand)", hand.mae, 0.5);
  expect("MSE(hand)", hand.mse, 0.375);
  expect("R2(hand)", hand.r2, 1.0 - 1.5 / 5.0);
  expect("GM(hand)", hand.gm, std::pow(0.5 * 0.5 * 1.0 * 1e-8, 0.25));
  const RegionMetrics flat = region_metrics(std::vector<double>{2.0, 2.0, 2.0}, std::vector<double>{1.0, 2.0, 3.0});
  if (!(flat.pearson == 0.0 && flat.pearson_degenerate)) bad.push_back("degenerate Pearson not flagged as 0");
  return check(bad.empty(), bad.empty() ? "GM({1,4})=2, MAE=2.5, Pearson(linear)=1, R2=1, hand example exact"
                                        : bad.front());
}

// ------------------------------------------------------------------ 8 and 11

struct SeedRun {
  MetricsReport vanilla, augmented;
  std::vector<std::pair<std::string, MetricsReport>> arms;
};

double few_mae(const MetricsReport& r) { return r.region(Region::few) ? r.region(Region::few)->mae : NAN; }
double all_mae(const MetricsReport& r) { return r.region(Region::all)->mae; }

SeedRun run_seed(std::uint64_t seed, bool ablations) {
  PipelineConfig c;
  c.seed = seed;
  SeedRun out;
  const DataSplit d = prepare_data(c);
  const ShotPartition part = shot_partition(d.bins.counts(d.train.targets));
  const VanillaResult v = stage_vanilla(c, d.train);
  const LabeledFeatureSet f = extract_features(v.model, d.train);
  const PriorityStage pr = stage_priority(c, v.model, f, d.bins);
  const DiffusionTrainResult diff = stage_diffusion(c, f, d.bins);

  auto arm = [&](const PipelineConfig& cfg, const DiffusionModel& model, const std::string& label) {
    const GenerationStage g = stage_generate(cfg, model, f, d.bins, pr.state);
    const AugmentStage a = stage_augment(cfg, v.model, f, g.generation.set);
    return evaluate_model(cfg, a.model, d.test, part, d.bins, label);
  };

  out.vanilla = evaluate_model(c, v.model, d.test, part, d.bins, "vanilla");
  out.augmented = arm(c, diff.model, "augmented");
  if (!ablations) return out;

  PipelineConfig uniform = c;
  uniform.priority.mode = AllocationMode::uniform;
  out.arms.emplace_back("uniform", arm(uniform, diff.model, "uniform"));

  PipelineConfig no_ema = c;
  no_ema.sample_with_ema = false;
  out.arms.emplace_back("ema-off", arm(no_ema, diff.model, "ema-off"));

  PipelineConfig linear = c;
  linear.diffusion.schedule = ScheduleKind::linear;
  out.arms.emplace_back("linear", arm(linear, stage_diffusion(linear, f, d.bins).model, "linear"));

  PipelineConfig noise = c;
  noise.diffusion.parameterization = Parameterization::noise;
  out.arms.emplace_back("noise", arm(noise, stage_diffusion(noise, f, d.bins).model, "noise"));
  return out;
}

Verdict desk_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> few_gain, all_loss;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SeedRun r = run_seed(seed, false);
    few_gain.push_back(100.0 * (few_mae(r.vanilla) - few_mae(r.augmented)) / few_mae(r.vanilla));
    all_loss.push_back(100.0 * (all_mae(r.augmented) - all_mae(r.vanilla)) / all_mae(r.vanilla));
    per_seed += fmt::format("{}{:+.1f}", per_seed.empty() ? "" : ",", few_gain.back());
    spdlog::info("criterion 8 seed {}: few-shot gain {:.2f}%, all-region change {:+.2f}%", seed, few_gain.back(),
                 all_loss.back());
  }
  const double gain = median(few_gain), loss = median(all_loss), elapsed = seconds_since(t0);
  return check(gain >= 10.0 && loss < 2.0 && elapsed < 600.0,
               fmt::format("median few-shot MAE gain {:.2f}% (need >= 10; seeds {}), all-region MAE change "
                           "{:+.2f}% (need < +2), {:.0f}s",
                           gain, per_seed, loss, elapsed));
}

Verdict ablation_arms() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> priority_few, uniform_few;
  std::size_t reports = 0;
  bool comparable = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SeedRun r = run_seed(seed, true);
    priority_few.push_back(few_mae(r.augmented));
    for (const auto& [name, report] : r.arms) {
      ++reports;
      // Same test set, so every region count must agree with the baseline.
      try {
        (void)compare_reports(r.vanilla, report);
      } catch (const std::exception&) {
        comparable = false;
      }
      if (name == "uniform") uniform_few.push_back(few_mae(report));
      spdlog::info("criterion 11 seed {} {}: few {:.3f} all {:.3f}", seed, name, few_mae(report), all_mae(report));
    }
  }
  const double p = median(priority_few), u = median(uniform_few);
  return check(reports == 20 && comparable && u >= p,
               fmt::format("{} arm reports (linear, noise, ema-off, uniform x 5 seeds){}; median few-shot MAE "
                           "uniform {:.3f} vs priority {:.3f} (need uniform >= priority), {:.0f}s",
                           reports, comparable ? "" : ", NOT comparable", u, p, seconds_since(t0)));
}

// ------------------------------------------------------------------ 9

Verdict housing_direction(const std::string& csv) {
  if (csv.empty()) return {Outcome::skip, "no CSV supplied (--csv or LATENTDIFF_HOUSING_CSV)"};
  std::vector<double> delta[3];
  const Region regions[3] = {Region::few, Region::median, Region::many};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    PipelineConfig c;
    c.seed = seed;
    c.data.train_csv = csv;
    c.data.y_min.reset();
    c.data.y_max.reset();
    const PipelineResult r = run_in_memory(c);
    for (int i = 0; i < 3; ++i) {
      const auto& v = r.vanilla_report.region(regions[i]);
      const auto& a = r.augmented_report.region(regions[i]);
      delta[i].push_back(v && a ? v->mse - a->mse : NAN);
    }
  }
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const double d = median(delta[i]);
    ok = ok && std::isfinite(d) && d > 0.0;
    detail += fmt::format("{}{} MSE reduction {:.4f}", detail.empty() ? "" : ", ", to_string(regions[i]), d);
  }
  return check(ok, detail + " (median of 3 seeds, need all > 0)");
}

// ------------------------------------------------------------------ 10

Verdict determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / fmt::format("latentdiff-accept-{:08x}", std::random_device{}());
  fs::create_directories(root);
  PipelineConfig c;
  c.seed = 10;
  write_json(root / "cfg.json", config_to_json(c));
  std::vector<std::string> differing;
  bool ran = true;
  // Both runs write to the same directory so the recorded out_dir matches.
  for (const char* run : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" run-all -c \"{}\" -o \"{}\" --log-level warn", cli,
                                        (root / "cfg.json").string(), (root / "out").string());
    ran = ran && std::system(cmd.c_str()) == 0;
    if (ran) fs::rename(root / "out", root / run);
  }
  std::size_t compared = 0;
  if (ran) {
    for (const auto& entry : fs::directory_iterator(root / "a")) {
      const fs::path name = entry.path().filename();
      if (name.extension() != ".json") continue;
      ++compared;
      std::string a = read_file(root / "a" / name), b = read_file(root / "b" / name);
      if (name == artifact::kManifest) {
        // The manifest is a run log and records per-stage wall time.
        auto strip = [](const std::string& text) {
          Json j = Json::parse(text);
          for (auto& [stage, entry] : j["stages"].items()) entry.erase("seconds");
          return j.dump();
        };
        a = strip(a);
        b = strip(b);
      }
      if (a != b) differing.push_back(name.string());
    }
  }
  fs::remove_all(root);
  if (!ran) return check(false, "run-all exited with an error");
  return check(differing.empty() && compared > 0,
               differing.empty() ? fmt::format("{} JSON artifacts byte-identical across two run-all invocations (manifest timings masked)",
                                               compared)
                                 : "differs: " + differing.front());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentdiff acceptance checks"};
  int only = 0;
  std::string csv;
  std::string cli = LATENTDIFF_CLI;
  app.add_option("--criterion", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--csv", csv, "Housing-format CSV for criterion 9");
  app.add_option("--cli", cli, "Path to the latentdiff binary");
  CLI11_PARSE(app, argc, argv);
  if (csv.empty())
    if (const char* env = std::getenv("LATENTDIFF_HOUSING_CSV")) csv = env;
  spdlog::set_level(spdlog::level::warn);
  if (std::getenv("LATENTDIFF_VERBOSE")) spdlog::set_level(spdlog::level::info);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"schedule correctness", schedule_correctness},
      {"v-parameterization identity", v_identity},
      {"gradient fidelity", gradient_fidelity},
      {"toy conditional generation", toy_generation},
      {"gate calibration", gate_calibration},
      {"priority/allocation oracle", priority_oracle},
      {"metric oracles", metric_oracles},
      {"desk-scale benchmark", desk_benchmark},
      {"housing CSV direction", [&] { return housing_direction(csv); }},
      {"run-all determinism", [&] { return determinism(cli); }},
      {"ablation arms", ablation_arms},
  };

  int failed = 0, skipped = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::skip ? "SKIP" : "FAIL";
    fmt::print("[{}] {:>2}. {}: {}\n", tag, i + 1, criteria[i].first, v.detail);
    std::fflush(stdout);
    failed += v.outcome == Outcome::fail;
    skipped += v.outcome == Outcome::skip;
  }
  if (failed > 0) return 1;
  // 77 lets ctest report a lone skipped criterion as skipped.
  return only != 0 && skipped > 0 ? 77 : 0;
}
