#pragma once

#include <cstdint>

#include "segcn/gcn.hpp"

namespace segcn {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  // L2 penalty on theta0 only unless set.
  bool decay_all_layers = false;
};

struct AdamState {
  DenseMatrix m0, v0, m1, v1;
  std::int64_t step = 0;

  static AdamState zeros_like(const GcnParams& params);
};

// One bias-corrected Adam step. Weight decay is added to the gradient as an
// L2 term (coupled). Throws on non-finite gradients.
void adam_step(GcnParams& params, const GradParams& grads, AdamState& state,
               const AdamConfig& cfg);

// teacher <- alpha * teacher + (1 - alpha) * student
void ema_update(GcnParams& teacher, const GcnParams& student, double alpha);

struct Schedules {
  double lambda_max = 2.0;
  double alpha_max = 0.999;
  int ramp_length = 200;
  double t_start = 0.9;
  double t_end = 0.7;
  int self_training_start = 200;
  int total_epochs = 1000;

  void validate() const;
};

struct ScheduleValues {
  double lambda;
  double alpha;
  double threshold;
};

// lambda: sigmoid-shaped ramp lambda_max * exp(-5 (1 - min(e/ramp, 1))^2)
// alpha:  min(1 - 1/(e+1), alpha_max)
// threshold: t_start until self_training_start, then linear down to t_end at
//            total_epochs.
ScheduleValues eval_schedules(int epoch, const Schedules& s);

}  // namespace segcn
