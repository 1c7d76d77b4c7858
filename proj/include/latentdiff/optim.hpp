#pragma once

#include <cstdint>
#include <functional>

#include "latentdiff/tensor.hpp"

namespace latentdiff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class StepStatus { applied, rejected_non_finite };

/// Bias-corrected Adam. Moment buffers are shaped after the parameters
/// passed at construction and every step is checked against them.
class Adam {
 public:
  Adam() = default;
  Adam(const ConstParamRefs& params, AdamConfig config);

  /// Leaves params and state untouched if any gradient is NaN/Inf.
  StepStatus step(const ParamRefs& params, const Grads& grads);

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const Grads& first_moment() const { return m_; }
  const Grads& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Grads m_;
  Grads v_;
  std::uint64_t step_ = 0;
};

/// Exponential moving average of parameters:
/// shadow <- decay * shadow + (1 - decay) * param.
class EmaShadow {
 public:
  EmaShadow() = default;
  EmaShadow(const ConstParamRefs& params, double decay);

  void update(const ConstParamRefs& params);
  /// One update with an explicit decay (used for warmup schedules).
  void update(const ConstParamRefs& params, double decay);

  double decay() const { return decay_; }
  const Grads& shadow() const { return shadow_; }
  Grads& shadow() { return shadow_; }

 private:
  Grads shadow_;
  double decay_ = 0.999;
};

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(Grads& grads, double max_norm);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central-difference oracle. `loss` must evaluate the scalar objective at the
/// current parameter values with no hidden randomness; `analytic` holds the
/// gradients that are being verified. Error per entry is
/// |analytic - numeric| / max(1, |analytic|).
GradCheckReport gradient_check(const ParamRefs& params, const std::function<double()>& loss,
                               const Grads& analytic, double h, double tol);

}  // namespace latentdiff
