#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentdiff/tensor.hpp"

namespace latentdiff {

enum class ScheduleKind { cosine, linear };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

/// Per-timestep noise tables for t = 0..T (index 0 is the clean state with
/// alpha_bar = 1; beta and alpha are only meaningful for t >= 1).
///
/// Cosine: alpha_bar_t = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2),
/// and beta_t = 1 - alpha_bar_t/alpha_bar_{t-1}. At t = T alpha_bar is zero up
/// to roundoff, so beta_T is held at the largest double below 1.
/// Linear: beta interpolates [1e-4, 0.02] over t = 1..T.
class NoiseSchedule {
 public:
  static constexpr double kLinearBetaStart = 1e-4;
  static constexpr double kLinearBetaEnd = 0.02;

  NoiseSchedule() = default;
  NoiseSchedule(ScheduleKind kind, int timesteps, double offset);

  ScheduleKind kind() const { return kind_; }
  int timesteps() const { return timesteps_; }
  double offset() const { return offset_; }

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;

  /// beta~_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t.
  double posterior_variance(int t) const;
  /// Coefficients of (z0_hat, z_t) in the posterior mean of q(z_{t-1} | z_t, z0).
  double posterior_coef_z0(int t) const;
  double posterior_coef_zt(int t) const;

  /// Throws RangeError unless 0 <= t <= T.
  void check_timestep(int t) const;

 private:
  ScheduleKind kind_ = ScheduleKind::cosine;
  int timesteps_ = 0;
  double offset_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

NoiseSchedule build_schedule(ScheduleKind kind, int timesteps, double offset = 0.008);

/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, one timestep for every row.
Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& z0, int t, const Matrix& eps);
/// Per-row timesteps.
Matrix forward_sample(const NoiseSchedule& schedule, const Matrix& z0, std::span<const int> t,
                      const Matrix& eps);

/// v_t = sqrt(alpha_bar_t) eps - sqrt(1 - alpha_bar_t) z0.
Matrix velocity_target(const NoiseSchedule& schedule, const Matrix& z0, const Matrix& eps, int t);
Matrix velocity_target(const NoiseSchedule& schedule, const Matrix& z0, const Matrix& eps,
                       std::span<const int> t);

/// z0_hat = sqrt(alpha_bar_t) z_t - sqrt(1 - alpha_bar_t) v_hat.
Matrix recover_z0(const NoiseSchedule& schedule, const Matrix& z_t, const Matrix& v_hat, int t);
Matrix recover_z0(const NoiseSchedule& schedule, const Matrix& z_t, const Matrix& v_hat,
                  std::span<const int> t);

/// z0_hat = (z_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t), for the
/// noise-prediction parameterization.
Matrix recover_z0_from_noise(const NoiseSchedule& schedule, const Matrix& z_t,
                             const Matrix& eps_hat, int t);

/// Posterior mean of the reverse transition given z0_hat and z_t.
Matrix posterior_mean(const NoiseSchedule& schedule, const Matrix& z0_hat, const Matrix& z_t, int t);

}  // namespace latentdiff
