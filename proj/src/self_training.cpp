#include "segcn/self_training.hpp"

#include <stdexcept>

#include "segcn/numerics.hpp"

namespace segcn {

PseudoLabelSet select_pseudo_labels(const DenseMatrix& p_student, const DenseMatrix& p_teacher,
                                    double threshold, const NodeMask& eligible,
                                    SelfTrainingMode mode) {
  if (!p_student.same_shape(p_teacher) || eligible.size() != p_teacher.rows()) {
    throw std::invalid_argument("select_pseudo_labels: shape mismatch");
  }
  PseudoLabelSet out;
  out.threshold = threshold;
  if (mode == SelfTrainingMode::kOff) return out;

  const auto teacher_class = row_argmax(p_teacher);
  const auto student_class = row_argmax(p_student);
  for (std::size_t i = 0; i < p_teacher.rows(); ++i) {
    if (!eligible[i]) continue;
    const int c = teacher_class[i];
    const auto uc = static_cast<std::size_t>(c);
    if (!(p_teacher(i, uc) > threshold)) continue;
    if (mode == SelfTrainingMode::kDual &&
        (student_class[i] != c || !(p_student(i, uc) > threshold))) {
      continue;
    }
    out.nodes.push_back(static_cast<NodeId>(i));
    out.classes.push_back(c);
  }
  return out;
}

}  // namespace segcn
