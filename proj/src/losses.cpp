#include "segcn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace segcn {
namespace {

std::size_t count_masked(const NodeMask& mask, std::size_t rows, const char* who) {
  if (mask.size() != rows) {
    throw std::invalid_argument(std::string(who) + ": mask length " + std::to_string(mask.size()) +
                                " != " + std::to_string(rows) + " rows");
  }
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (n == 0) throw std::invalid_argument(std::string(who) + ": empty node mask");
  return n;
}

double log_floor(double p) { return std::log(std::max(p, kProbFloor)); }

}  // namespace

LossValue cross_entropy(const DenseMatrix& probs, std::span<const int> targets,
                        const NodeMask& mask, Reduction reduction) {
  const std::size_t n = count_masked(mask, probs.rows(), "cross_entropy");
  if (targets.size() != probs.rows()) {
    throw std::invalid_argument("cross_entropy: targets length mismatch");
  }
  const double scale = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  LossValue out{0.0, DenseMatrix(probs.rows(), probs.cols())};
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    const int y = targets[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw std::invalid_argument("cross_entropy: node " + std::to_string(i) +
                                  " has invalid target " + std::to_string(y));
    }
    out.value -= log_floor(probs(i, static_cast<std::size_t>(y)));
    auto g = out.grad_logits.row(i);
    const auto p = probs.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = p[c] * scale;
    g[static_cast<std::size_t>(y)] -= scale;
  }
  out.value *= scale;
  return out;
}

LossValue kl_consistency(const DenseMatrix& p_teacher, const DenseMatrix& p_student,
                         const NodeMask& mask, Reduction reduction) {
  if (!p_teacher.same_shape(p_student)) {
    throw std::invalid_argument("kl_consistency: teacher/student shape mismatch");
  }
  const std::size_t n = count_masked(mask, p_student.rows(), "kl_consistency");
  const double scale = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  LossValue out{0.0, DenseMatrix(p_student.rows(), p_student.cols())};
  for (std::size_t i = 0; i < p_student.rows(); ++i) {
    if (!mask[i]) continue;
    const auto pt = p_teacher.row(i);
    const auto ps = p_student.row(i);
    auto g = out.grad_logits.row(i);
    for (std::size_t c = 0; c < pt.size(); ++c) {
      if (pt[c] > 0.0) out.value += pt[c] * (log_floor(pt[c]) - log_floor(ps[c]));
      g[c] = (ps[c] - pt[c]) * scale;
    }
  }
  out.value *= scale;
  return out;
}

LossReport combine(double sup, double unsup, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("combine: lambda must be non-negative");
  return {sup, unsup, lambda, sup + lambda * unsup};
}

}  // namespace segcn
