#include "latentdiff/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latentdiff/errors.hpp"

namespace latentdiff {

namespace {

void check_shapes(const Grads& reference, const ParamRefs& params, const Grads& grads,
                  const char* where) {
  if (params.size() != reference.size() || grads.size() != reference.size())
    throw DimensionError(std::string(where) + ": tensor count mismatch");
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (params[i]->rows() != reference[i].rows() || params[i]->cols() != reference[i].cols() ||
        grads[i].rows() != reference[i].rows() || grads[i].cols() != reference[i].cols())
      throw DimensionError(std::string(where) + ": shape mismatch at tensor " + std::to_string(i));
  }
}

}  // namespace

Adam::Adam(const ConstParamRefs& params, AdamConfig config)
    : config_(config), m_(zeros_like(params)), v_(zeros_like(params)) {}

StepStatus Adam::step(const ParamRefs& params, const Grads& grads) {
  check_shapes(m_, params, grads, "Adam::step");
  for (const Matrix& g : grads)
    if (!g.allFinite()) return StepStatus::rejected_non_finite;

  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
  return StepStatus::applied;
}

EmaShadow::EmaShadow(const ConstParamRefs& params, double decay) : decay_(decay) {
  if (decay < 0.0 || decay > 1.0) throw ConfigError("EMA decay must lie in [0, 1]");
  shadow_.reserve(params.size());
  for (const Matrix* p : params) shadow_.push_back(*p);
}

void EmaShadow::update(const ConstParamRefs& params) { update(params, decay_); }

void EmaShadow::update(const ConstParamRefs& params, double decay) {
  if (decay < 0.0 || decay > 1.0) throw ConfigError("EmaShadow::update: decay must lie in [0, 1]");
  if (params.size() != shadow_.size()) throw DimensionError("EmaShadow::update: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != shadow_[i].rows() || params[i]->cols() != shadow_[i].cols())
      throw DimensionError("EmaShadow::update: shape mismatch at tensor " + std::to_string(i));
    shadow_[i] = decay * shadow_[i] + (1.0 - decay) * (*params[i]);
  }
}

double clip_global_norm(Grads& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix& g : grads) g *= scale;
  }
  return norm;
}

GradCheckReport gradient_check(const ParamRefs& params, const std::function<double()>& loss,
                               const Grads& analytic, double h, double tol) {
  if (!(h > 0.0)) throw ConfigError("gradient_check: step h must be positive");
  if (analytic.size() != params.size()) throw DimensionError("gradient_check: tensor count mismatch");

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    if (analytic[i].rows() != p.rows() || analytic[i].cols() != p.cols())
      throw DimensionError("gradient_check: shape mismatch at tensor " + std::to_string(i));
    for (Index k = 0; k < p.size(); ++k) {
      const double saved = p.data()[k];
      p.data()[k] = saved + h;
      const double up = loss();
      p.data()[k] = saved - h;
      const double down = loss();
      p.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].data()[k];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      report.max_relative_error = std::max(report.max_relative_error, err);
      ++report.checked;
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

}  // namespace latentdiff
