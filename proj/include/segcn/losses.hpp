#pragma once

#include <span>
#include <vector>

#include "segcn/matrix.hpp"

namespace segcn {

// Per-node membership flags selecting which nodes a loss term covers.
using NodeMask = std::vector<bool>;

// Floor applied to probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-12;

enum class Reduction { kMean, kSum };

struct LossValue {
  double value = 0.0;
  DenseMatrix grad_logits;  // gradient w.r.t. the logits feeding the softmax
};

struct LossReport {
  double sup_loss = 0.0;
  double unsup_loss = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

// -log p(target) over the masked nodes. targets[i] must be a valid class for
// every masked node. Throws on an empty mask.
LossValue cross_entropy(const DenseMatrix& probs, std::span<const int> targets,
                        const NodeMask& mask, Reduction reduction = Reduction::kMean);

// KL(p_teacher || p_student) over the masked nodes; the teacher is a constant.
LossValue kl_consistency(const DenseMatrix& p_teacher, const DenseMatrix& p_student,
                         const NodeMask& mask, Reduction reduction = Reduction::kMean);

LossReport combine(double sup, double unsup, double lambda);

}  // namespace segcn
