#include "latentdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "latentdiff/errors.hpp"

namespace latentdiff {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::cosine ? "cosine" : "linear";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "cosine") return ScheduleKind::cosine;
  if (text == "linear") return ScheduleKind::linear;
  throw ConfigError("unknown noise schedule kind '" + std::string(text) + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, int timesteps, double offset)
    : kind_(kind), timesteps_(timesteps), offset_(offset) {
  if (timesteps < 1) throw ConfigError("noise schedule: T must be >= 1");
  if (!(offset >= 0.0 && offset < 1.0)) throw ConfigError("noise schedule: offset must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(timesteps) + 1;
  beta_.assign(n, 0.0);
  alpha_.assign(n, 1.0);
  alpha_bar_.assign(n, 1.0);
  const double T = timesteps;
  const double below_one = std::nextafter(1.0, 0.0);

  if (kind == ScheduleKind::cosine) {
    auto f = [&](double t) {
      const double c = std::cos(((t / T + offset) / (1.0 + offset)) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    for (int t = 1; t <= timesteps; ++t) {
      const auto i = static_cast<std::size_t>(t);
      alpha_bar_[i] = f(t) / f0;
      alpha_[i] = alpha_bar_[i] / alpha_bar_[i - 1];
      beta_[i] = std::min(1.0 - alpha_[i], below_one);
    }
  } else {
    for (int t = 1; t <= timesteps; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const double frac = timesteps == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1.0);
      beta_[i] = kLinearBetaStart + frac * (kLinearBetaEnd - kLinearBetaStart);
      alpha_[i] = 1.0 - beta_[i];
      alpha_bar_[i] = alpha_bar_[i - 1] * alpha_[i];
    }
  }
}

void NoiseSchedule::check_timestep(int t) const {
  if (t < 0 || t > timesteps_)
    throw RangeError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps_) + "]");
}

double NoiseSchedule::beta(int t) const {
  check_timestep(t);
  return beta_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const {
  check_timestep(t);
  return alpha_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_timestep(t);
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::posterior_variance(int t) const {
  if (t < 1) throw RangeError("posterior_variance: t must be >= 1");
  return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
}

double NoiseSchedule::posterior_coef_z0(int t) const {
  if (t < 1) throw RangeError("posterior_coef_z0: t must be >= 1");
  return std::sqrt(alpha_bar(t - 1)) * beta(t) / (1.0 - alpha_bar(t));
}

double NoiseSchedule::posterior_coef_zt(int t) const {
  if (t < 1) throw RangeError("posterior_coef_zt: t must be >= 1");
  return std::sqrt(alpha(t)) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

NoiseSchedule build_schedule(ScheduleKind kind, int timesteps, double offset) {
  return NoiseSchedule(kind, timesteps, offset);
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(where) + ": operand shapes differ");
}

// Per-row sqrt(alpha_bar) and sqrt(1 - alpha_bar).
std::pair<Vector, Vector> row_scales(const NoiseSchedule& s, std::span<const int> t, Index rows) {
  if (static_cast<Index>(t.size()) != rows) throw DimensionError("one timestep per row required");
  Vector signal(rows), noise(rows);
  for (Index r = 0; r < rows; ++r) {
    const double ab = s.alpha_bar(t[static_cast<std::size_t>(r)]);
    signal(r) = std::sqrt(ab);
    noise(r) = std::sqrt(1.0 - ab);
  }
  return {signal, noise};
}

// a * x + b * y with per-row a, b.
Matrix row_combine(const Vector& a, const Matrix& x, const Vector& b, const Matrix& y) {
  return (x.array().colwise() * a.array() + y.array().colwise() * b.array()).matrix();
}

}  // namespace

Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& z0, int t, const Matrix& eps) {
  require_same_shape(z0, eps, "forward_sample");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& z0, std::span<const int> t,
                      const Matrix& eps) {
  require_same_shape(z0, eps, "forward_sample");
  const auto [signal, noise] = row_scales(schedule, t, z0.rows());
  return row_combine(signal, z0, noise, eps);
}

Matrix velocity_target(const NoiseSchedule& schedule, const Matrix& z0, const Matrix& eps, int t) {
  require_same_shape(z0, eps, "velocity_target");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * eps - std::sqrt(1.0 - ab) * z0;
}

Matrix velocity_target(const NoiseSchedule& schedule, const Matrix& z0, const Matrix& eps,
                       std::span<const int> t) {
  require_same_shape(z0, eps, "velocity_target");
  const auto [signal, noise] = row_scales(schedule, t, z0.rows());
  return row_combine(signal, eps, -noise, z0);
}

Matrix recover_z0(const NoiseSchedule& schedule, const Matrix& z_t, const Matrix& v_hat, int t) {
  require_same_shape(z_t, v_hat, "recover_z0");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * z_t - std::sqrt(1.0 - ab) * v_hat;
}

Matrix recover_z0(const NoiseSchedule& schedule, const Matrix& z_t, const Matrix& v_hat,
                  std::span<const int> t) {
  require_same_shape(z_t, v_hat, "recover_z0");
  const auto [signal, noise] = row_scales(schedule, t, z_t.rows());
  return row_combine(signal, z_t, -noise, v_hat);
}

Matrix recover_z0_from_noise(const NoiseSchedule& schedule, const Matrix& z_t,
                             const Matrix& eps_hat, int t) {
  require_same_shape(z_t, eps_hat, "recover_z0_from_noise");
  const double ab = schedule.alpha_bar(t);
  return (z_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

Matrix posterior_mean(const NoiseSchedule& schedule, const Matrix& z0_hat, const Matrix& z_t, int t) {
  require_same_shape(z0_hat, z_t, "posterior_mean");
  return schedule.posterior_coef_z0(t) * z0_hat + schedule.posterior_coef_zt(t) * z_t;
}

}  // namespace latentdiff
