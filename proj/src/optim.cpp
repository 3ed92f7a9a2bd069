#include "segcn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace segcn {

AdamState AdamState::zeros_like(const GcnParams& params) {
  AdamState s;
  s.m0 = DenseMatrix(params.theta0.rows(), params.theta0.cols());
  s.v0 = s.m0;
  s.m1 = DenseMatrix(params.theta1.rows(), params.theta1.cols());
  s.v1 = s.m1;
  return s;
}

namespace {

void check_finite(const DenseMatrix& g, const char* name, std::int64_t step) {
  const auto& v = g.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << "adam_step: non-finite gradient in " << name << " at entry (" << i / g.cols() << ","
          << i % g.cols() << ") = " << v[i] << " on step " << step + 1;
      throw std::runtime_error(msg.str());
    }
  }
}

void update(DenseMatrix& param, const DenseMatrix& grad, DenseMatrix& m, DenseMatrix& v,
            double decay, double lr_t, const AdamConfig& cfg, double bc2) {
  auto& p = param.values();
  const auto& g = grad.values();
  auto& mv = m.values();
  auto& vv = v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] + decay * p[i];
    mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gi;
    vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gi * gi;
    p[i] -= lr_t * mv[i] / (std::sqrt(vv[i] / bc2) + cfg.eps);
  }
}

}  // namespace

void adam_step(GcnParams& params, const GradParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (!grads.grad_theta0.same_shape(params.theta0) ||
      !grads.grad_theta1.same_shape(params.theta1) || !state.m0.same_shape(params.theta0) ||
      !state.m1.same_shape(params.theta1)) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  check_finite(grads.grad_theta0, "theta0", state.step);
  check_finite(grads.grad_theta1, "theta1", state.step);
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double lr_t = cfg.lr / bc1;
  update(params.theta0, grads.grad_theta0, state.m0, state.v0, cfg.weight_decay, lr_t, cfg, bc2);
  update(params.theta1, grads.grad_theta1, state.m1, state.v1,
         cfg.decay_all_layers ? cfg.weight_decay : 0.0, lr_t, cfg, bc2);
}

void ema_update(GcnParams& teacher, const GcnParams& student, double alpha) {
  if (!teacher.theta0.same_shape(student.theta0) || !teacher.theta1.same_shape(student.theta1)) {
    throw std::invalid_argument("ema_update: shape mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("ema_update: alpha outside [0,1]");
  auto blend = [alpha](DenseMatrix& t, const DenseMatrix& s) {
    auto& tv = t.values();
    const auto& sv = s.values();
    for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = alpha * tv[i] + (1.0 - alpha) * sv[i];
  };
  blend(teacher.theta0, student.theta0);
  blend(teacher.theta1, student.theta1);
}

void Schedules::validate() const {
  if (t_end > t_start) throw std::invalid_argument("schedules: t_end must not exceed t_start");
  if (ramp_length < 0 || ramp_length > total_epochs) {
    throw std::invalid_argument("schedules: ramp_length must lie in [0, total_epochs]");
  }
  if (lambda_max < 0.0) throw std::invalid_argument("schedules: lambda_max must be >= 0");
  if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) {
    throw std::invalid_argument("schedules: alpha_max outside [0,1]");
  }
  if (total_epochs <= 0) throw std::invalid_argument("schedules: total_epochs must be positive");
  if (self_training_start < 0) {
    throw std::invalid_argument("schedules: self_training_start must be >= 0");
  }
}

ScheduleValues eval_schedules(int epoch, const Schedules& s) {
  const double e = static_cast<double>(std::clamp(epoch, 0, s.total_epochs));
  const double progress = s.ramp_length > 0 ? std::min(e / s.ramp_length, 1.0) : 1.0;
  const double lambda = s.lambda_max * std::exp(-5.0 * (1.0 - progress) * (1.0 - progress));
  const double alpha = std::min(1.0 - 1.0 / (e + 1.0), s.alpha_max);
  double threshold = s.t_start;
  if (epoch >= s.self_training_start) {
    const int span = s.total_epochs - s.self_training_start;
    const double frac = span > 0 ? (e - s.self_training_start) / span : 1.0;
    threshold = s.t_start + (s.t_end - s.t_start) * std::min(frac, 1.0);
  }
  return {lambda, alpha, threshold};
}

}  // namespace segcn
