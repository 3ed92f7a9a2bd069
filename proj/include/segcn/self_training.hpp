#pragma once

#include <vector>

#include "segcn/graph.hpp"
#include "segcn/losses.hpp"
#include "segcn/matrix.hpp"

namespace segcn {

enum class SelfTrainingMode { kOff, kTeacherOnly, kDual };

struct PseudoLabelSet {
  std::vector<NodeId> nodes;
  std::vector<int> classes;
  int epoch = -1;
  double threshold = 0.0;

  std::size_t size() const noexcept { return nodes.size(); }
};

// Dual agreement: node i is selected iff eligible, both models put their
// argmax on the same class c, and both exceed `threshold` on c. In
// teacher-only mode only the teacher's confidence is checked.
PseudoLabelSet select_pseudo_labels(const DenseMatrix& p_student, const DenseMatrix& p_teacher,
                                    double threshold, const NodeMask& eligible,
                                    SelfTrainingMode mode = SelfTrainingMode::kDual);

}  // namespace segcn
